use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mcdrr_core::report::{write_file, ReportError, SweepSummary};
use mcdrr_core::scenario::FULL_DURATION;
use mcdrr_core::{
    parse_scenario, Discipline, Report, ReportFormat, ScenarioConfig, ScenarioError, SimError,
    SimTime, Simulation,
};

const EXIT_IO: u8 = 1;
const EXIT_PARSE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Parser)]
#[command(name = "mcdrr", version, about = "Multi-channel deficit round-robin link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit per-flow CSV and a JSON summary.
    Run(RunArgs),
    /// Print a built-in preset in the scenario file format.
    ShowPreset { name: String },
}

#[derive(Args)]
struct Source {
    /// Built-in scenario: paper-a or paper-b.
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<String>,
    /// Scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Summary,
    Both,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Summary => ReportFormat::Summary,
            Format::Both => ReportFormat::Both,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Simulated seconds (decimal).
    #[arg(long, conflicts_with = "full")]
    duration_s: Option<f64>,
    /// Run the full ten simulated minutes.
    #[arg(long)]
    full: bool,
    /// Master seed(s); more than one runs a sweep.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seed: Vec<u64>,
    /// Override the scheduler: mcdrr or rr-baseline.
    #[arg(long)]
    scheduler: Option<Discipline>,
    /// Directory for output files; without it results go to stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Run sweep seeds on all cores.
    #[arg(long)]
    parallel: bool,
    /// Check scheduler and link invariants after every event.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Scenario(ScenarioError),
    Internal(SimError),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => EXIT_IO,
            Failure::Scenario(ScenarioError::Validation(_)) => EXIT_VALIDATION,
            Failure::Scenario(_) => EXIT_PARSE,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(msg) => f.write_str(msg),
            Failure::Scenario(e) => write!(f, "{e}"),
            Failure::Internal(e) => write!(f, "internal error: {e}"),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load(source: &Source) -> Result<(ScenarioConfig, String), Failure> {
    match (&source.preset, &source.scenario) {
        (Some(name), _) => Ok((
            ScenarioConfig::preset(name).map_err(Failure::Scenario)?,
            name.clone(),
        )),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
            let stem = path
                .file_stem()
                .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
            Ok((parse_scenario(&text).map_err(Failure::Scenario)?, stem))
        }
        (None, None) => Ok((
            ScenarioConfig::preset("paper-a").map_err(Failure::Scenario)?,
            "paper-a".into(),
        )),
    }
}

fn simulate(config: ScenarioConfig, verify: bool) -> Result<Report, Failure> {
    let sim = Simulation::new(config).map_err(Failure::Internal)?;
    let sim = if verify { sim.verify(true) } else { sim };
    sim.run().map(|(r, _)| r).map_err(Failure::Internal)
}

fn emit(report: &Report, out_dir: Option<&Path>, stem: &str, format: ReportFormat) -> Result<(), Failure> {
    if let Some(dir) = out_dir {
        for path in report.write(dir, stem, format)? {
            eprintln!("wrote {}", path.display());
        }
        return Ok(());
    }
    let out = &report.config.output;
    if out.csv.is_some() || out.summary.is_some() {
        if let Some(p) = &out.csv {
            write_file(p, &report.to_csv())?;
        }
        if let Some(p) = &out.summary {
            write_file(p, &report.to_summary_json())?;
        }
        return Ok(());
    }
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        print!("{}", report.to_csv());
    }
    if matches!(format, ReportFormat::Summary | ReportFormat::Both) {
        print!("{}", report.to_summary_json());
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let (mut config, stem) = load(&args.source)?;
    if args.full {
        config.duration = FULL_DURATION;
    } else if let Some(s) = args.duration_s {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Failure::Scenario(ScenarioError::Validation(
                "duration must be a non-negative number of seconds".into(),
            )));
        }
        config.duration = SimTime((s * 1e12).round() as u64);
    }
    if let Some(d) = args.scheduler {
        config.scheduler.discipline = d;
    }
    config.validate().map_err(Failure::Scenario)?;
    let format = ReportFormat::from(args.format);

    if args.seed.len() <= 1 {
        if let Some(&seed) = args.seed.first() {
            config.master_seed = seed;
        }
        let report = simulate(config, args.verify)?;
        return emit(&report, args.out_dir.as_deref(), &stem, format);
    }

    let configs: Vec<ScenarioConfig> = args
        .seed
        .iter()
        .map(|&seed| ScenarioConfig {
            master_seed: seed,
            ..config.clone()
        })
        .collect();
    let reports: Vec<Result<Report, Failure>> = if args.parallel {
        configs.into_par_iter().map(|c| simulate(c, args.verify)).collect()
    } else {
        configs.into_iter().map(|c| simulate(c, args.verify)).collect()
    };
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let sweep = SweepSummary::new(&reports);
    match args.out_dir.as_deref() {
        Some(dir) => {
            for r in &reports {
                let seed_stem = format!("{stem}-seed{}", r.seed);
                for path in r.write(dir, &seed_stem, format)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            let path = dir.join(format!("{stem}.sweep.json"));
            write_file(&path, &sweep.to_json())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", sweep.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ShowPreset { name } => ScenarioConfig::preset(&name)
            .map(|c| print!("{}", c.to_text()))
            .map_err(Failure::Scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcdrr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

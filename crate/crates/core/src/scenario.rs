//! Scenario description, built-in presets and the text config format.
//!
//! ```text
//! mcdrr-scenario 1
//! [link]
//! channels = 16
//! transmitters = 2
//! line_rate_bps = 1000000000
//! ifg_bytes = 12
//! tuning_time_ns = 0
//! [scheduler]
//! name = mcdrr                      # or rr-baseline
//! quantum = 1518                    # one value, or one per channel: 1518,3036,...
//! max_packets_per_visit = unlimited
//! accrue_quantum_when_busy = true
//! voq_capacity = 1000
//! [run]
//! duration_s = 30
//! warmup_s = 0
//! seed = 1
//! [output]
//! csv = flows.csv
//! summary = summary.json
//! [flows]
//! # id  mean_interframe_us  size
//! 0     16                  uniform 64 1518
//! 1     48                  fixed 500
//! ```
//!
//! `#` starts a comment. Omitted keys take the defaults shown above.

use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::LinkParams;
use crate::sched::{Discipline, SchedulerConfig, DEFAULT_QUANTUM, DEFAULT_VOQ_CAPACITY};
use crate::time::{SimTime, PS_PER_NS, PS_PER_SEC, PS_PER_US};
use crate::traffic::{scenario_a_flows, scenario_b_flows, FlowSpec, SizeDist};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;
const HEADER: &str = "mcdrr-scenario";

pub const PRESET_DURATION: SimTime = SimTime::from_secs(30);
/// Ten simulated minutes.
pub const FULL_DURATION: SimTime = SimTime::from_secs(600);
pub const PRESETS: [&str; 2] = ["paper-a", "paper-b"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown preset {0:?} (expected paper-a or paper-b)")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub link: LinkParams,
    pub flows: Vec<FlowSpec>,
    pub scheduler: SchedulerConfig,
    pub duration: SimTime,
    /// Deliveries before this instant do not count toward throughput.
    pub warmup: SimTime,
    pub master_seed: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ScenarioConfig {
    /// Sixteen 1 Gb/s channels, two transmitters, the given flows and
    /// default scheduler settings.
    pub fn with_flows(flows: Vec<FlowSpec>) -> Self {
        let link = LinkParams::default();
        ScenarioConfig {
            scheduler: SchedulerConfig::new(link.channels),
            link,
            flows,
            duration: PRESET_DURATION,
            warmup: SimTime::ZERO,
            master_seed: 1,
            output: OutputPaths::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "paper-a" => Ok(Self::with_flows(scenario_a_flows())),
            "paper-b" => Ok(Self::with_flows(scenario_b_flows())),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        let w = self.link.channels;
        if w == 0 {
            return bad("at least one channel is required".into());
        }
        if self.link.transmitters == 0 {
            return bad("at least one transmitter is required".into());
        }
        if self.link.line_rate_bps == 0 {
            return bad("line rate must be positive".into());
        }
        if self.flows.len() != w {
            return bad(format!("{} flows for {w} channels; need exactly one per channel", self.flows.len()));
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.flow_id != i {
                return bad(format!("flow at position {i} has id {}; ids must be 0..{w} in order", f.flow_id));
            }
            f.validate().map_err(|e| ScenarioError::Validation(e.to_string()))?;
        }
        if self.scheduler.quanta.len() != w {
            return bad(format!("{} quanta for {w} channels", self.scheduler.quanta.len()));
        }
        if self.scheduler.quanta.contains(&0) {
            return bad("quantum must be positive".into());
        }
        if self.scheduler.voq_capacity == 0 {
            return bad("VOQ capacity must be positive".into());
        }
        if self.warmup > self.duration {
            return bad("warm-up longer than the run".into());
        }
        Ok(())
    }

    /// Renders the config in the text format accepted by [`parse_scenario`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER} {SCENARIO_FORMAT_VERSION}");
        let l = &self.link;
        let _ = writeln!(s, "[link]");
        let _ = writeln!(s, "channels = {}", l.channels);
        let _ = writeln!(s, "transmitters = {}", l.transmitters);
        let _ = writeln!(s, "line_rate_bps = {}", l.line_rate_bps);
        let _ = writeln!(s, "ifg_bytes = {}", l.ifg_bytes);
        let _ = writeln!(s, "tuning_time_ns = {}", fmt_scaled(l.tuning_time.as_ps(), PS_PER_NS));
        let c = &self.scheduler;
        let _ = writeln!(s, "[scheduler]");
        let _ = writeln!(s, "name = {}", c.discipline);
        let quantum = match c.quanta.first() {
            Some(&q) if c.quanta.iter().all(|&x| x == q) => q.to_string(),
            _ => c.quanta.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        };
        let _ = writeln!(s, "quantum = {quantum}");
        let max = c
            .max_packets_per_visit
            .map_or_else(|| "unlimited".to_string(), |n| n.to_string());
        let _ = writeln!(s, "max_packets_per_visit = {max}");
        let _ = writeln!(s, "accrue_quantum_when_busy = {}", c.accrue_quantum_when_busy);
        let _ = writeln!(s, "voq_capacity = {}", c.voq_capacity);
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "duration_s = {}", fmt_scaled(self.duration.as_ps(), PS_PER_SEC));
        let _ = writeln!(s, "warmup_s = {}", fmt_scaled(self.warmup.as_ps(), PS_PER_SEC));
        let _ = writeln!(s, "seed = {}", self.master_seed);
        if self.output.csv.is_some() || self.output.summary.is_some() {
            let _ = writeln!(s, "[output]");
            if let Some(p) = &self.output.csv {
                let _ = writeln!(s, "csv = {}", p.display());
            }
            if let Some(p) = &self.output.summary {
                let _ = writeln!(s, "summary = {}", p.display());
            }
        }
        let _ = writeln!(s, "[flows]");
        let _ = writeln!(s, "# id mean_interframe_us size");
        for f in &self.flows {
            let size = match f.size {
                SizeDist::Uniform {
                    min_bytes,
                    max_bytes,
                } => format!("uniform {min_bytes} {max_bytes}"),
                SizeDist::Fixed { bytes } => format!("fixed {bytes}"),
            };
            let mean = fmt_scaled(f.mean_interframe.as_ps(), PS_PER_US);
            let _ = writeln!(s, "{} {mean} {size}", f.flow_id);
        }
        s
    }
}

/// `value / scale` as a plain decimal with no trailing zeros.
fn fmt_scaled(value: u64, scale: u64) -> String {
    let whole = value / scale;
    let frac = value % scale;
    if frac == 0 {
        return whole.to_string();
    }
    let digits = scale.ilog10() as usize;
    let frac = format!("{frac:0digits$}");
    format!("{whole}.{}", frac.trim_end_matches('0'))
}

/// Parses a non-negative decimal and scales it to an integer, exactly.
/// Rejects more fractional digits than `scale` can hold.
fn parse_scaled(text: &str, scale: u64) -> Result<u64, String> {
    let digits = scale.ilog10() as usize;
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() && frac.is_empty() || !all_digits(whole) || !all_digits(frac) {
        return Err(format!("{text:?} is not a non-negative decimal number"));
    }
    if frac.len() > digits {
        return Err(format!("{text:?} has more precision than 1/{scale}"));
    }
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| format!("{text:?} is too large"))? };
    let frac_val: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u64>().unwrap() * 10u64.pow((digits - frac.len()) as u32)
    };
    whole
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| format!("{text:?} is too large"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Link,
    Scheduler,
    Run,
    Output,
    Flows,
}

fn parse_num<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{what}: {value:?} is not a valid number"))
}

fn parse_bool(value: &str, what: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{what}: expected true or false, got {value:?}")),
    }
}

fn parse_flow(line: &str) -> Result<FlowSpec, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let (id, mean, dist) = match fields.as_slice() {
        [id, mean, dist @ ..] => (id, mean, dist),
        _ => return Err("flow line needs: id mean_interframe_us size".into()),
    };
    let flow_id = parse_num(id, "flow id")?;
    let mean_interframe = SimTime(parse_scaled(mean, PS_PER_US)?);
    let size = match dist {
        ["uniform", min, max] => SizeDist::Uniform {
            min_bytes: parse_num(min, "uniform min")?,
            max_bytes: parse_num(max, "uniform max")?,
        },
        ["fixed", bytes] => SizeDist::Fixed {
            bytes: parse_num(bytes, "fixed size")?,
        },
        _ => return Err(format!("size must be `uniform MIN MAX` or `fixed BYTES`, got {:?}", dist.join(" "))),
    };
    Ok(FlowSpec {
        flow_id,
        mean_interframe,
        size,
    })
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut link = LinkParams::default();
    let mut quanta: Option<Vec<u64>> = None;
    let mut discipline = Discipline::Mcdrr;
    let mut max_packets_per_visit = None;
    let mut accrue = true;
    let mut voq_capacity = DEFAULT_VOQ_CAPACITY;
    let mut duration = PRESET_DURATION;
    let mut warmup = SimTime::ZERO;
    let mut seed = 1;
    let mut output = OutputPaths::default();
    let mut flows: Vec<FlowSpec> = Vec::new();

    let mut saw_header = false;
    let mut section: Option<Section> = None;
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let err = |reason: String| ScenarioError::Parse {
            line: line_no,
            reason,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            let version = line
                .strip_prefix(HEADER)
                .map(str::trim)
                .ok_or_else(|| err(format!("expected `{HEADER} {SCENARIO_FORMAT_VERSION}` header")))?;
            if version != SCENARIO_FORMAT_VERSION.to_string() {
                return Err(err(format!("unsupported format version {version:?}")));
            }
            saw_header = true;
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(match name.trim() {
                "link" => Section::Link,
                "scheduler" => Section::Scheduler,
                "run" => Section::Run,
                "output" => Section::Output,
                "flows" => Section::Flows,
                other => return Err(err(format!("unknown section [{other}]"))),
            });
            continue;
        }
        let Some(section) = section else {
            return Err(err("entry outside of any section".into()));
        };
        if section == Section::Flows {
            flows.push(parse_flow(line).map_err(err)?);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let res: Result<(), String> = (|| {
            match (section, key) {
                (Section::Link, "channels") => link.channels = parse_num(value, key)?,
                (Section::Link, "transmitters") => link.transmitters = parse_num(value, key)?,
                (Section::Link, "line_rate_bps") => link.line_rate_bps = parse_num(value, key)?,
                (Section::Link, "ifg_bytes") => link.ifg_bytes = parse_num(value, key)?,
                (Section::Link, "tuning_time_ns") => {
                    link.tuning_time = SimTime(parse_scaled(value, PS_PER_NS)?)
                }
                (Section::Scheduler, "name") => discipline = value.parse()?,
                (Section::Scheduler, "quantum") => {
                    quanta = Some(
                        value
                            .split(',')
                            .map(|q| parse_num(q.trim(), key))
                            .collect::<Result<_, _>>()?,
                    )
                }
                (Section::Scheduler, "max_packets_per_visit") => {
                    max_packets_per_visit = match value {
                        "unlimited" => None,
                        v => Some(
                            parse_num::<NonZeroUsize>(v, key)
                                .map_err(|_| format!("{key}: expected a positive integer or `unlimited`"))?,
                        ),
                    }
                }
                (Section::Scheduler, "accrue_quantum_when_busy") => accrue = parse_bool(value, key)?,
                (Section::Scheduler, "voq_capacity") => voq_capacity = parse_num(value, key)?,
                (Section::Run, "duration_s") => duration = SimTime(parse_scaled(value, PS_PER_SEC)?),
                (Section::Run, "warmup_s") => warmup = SimTime(parse_scaled(value, PS_PER_SEC)?),
                (Section::Run, "seed") => seed = parse_num(value, key)?,
                (Section::Output, "csv") => output.csv = Some(PathBuf::from(value)),
                (Section::Output, "summary") => output.summary = Some(PathBuf::from(value)),
                _ => return Err(format!("unknown key {key:?}")),
            }
            Ok(())
        })();
        res.map_err(err)?;
    }
    if !saw_header {
        return Err(ScenarioError::Parse {
            line: last_line.max(1),
            reason: "empty scenario".into(),
        });
    }

    flows.sort_by_key(|f| f.flow_id);
    let w = link.channels;
    let quanta = match quanta {
        None => vec![DEFAULT_QUANTUM; w],
        Some(q) if q.len() == 1 => vec![q[0]; w],
        Some(q) => q,
    };
    let config = ScenarioConfig {
        link,
        flows,
        scheduler: SchedulerConfig {
            discipline,
            quanta,
            max_packets_per_visit,
            accrue_quantum_when_busy: accrue,
            voq_capacity,
        },
        duration,
        warmup,
        master_seed: seed,
        output,
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_setup() {
        let a = ScenarioConfig::preset("paper-a").unwrap();
        assert_eq!(a.link.channels, 16);
        assert_eq!(a.link.transmitters, 2);
        assert_eq!(a.link.line_rate_bps, 1_000_000_000);
        assert_eq!(a.scheduler.voq_capacity, 1000);
        assert_eq!(a.flows, scenario_a_flows());
        assert_eq!(a.duration, SimTime::from_secs(30));
        a.validate().unwrap();
        let b = ScenarioConfig::preset("paper-b").unwrap();
        assert_eq!(b.flows, scenario_b_flows());
        assert!(matches!(
            ScenarioConfig::preset("paper-c"),
            Err(ScenarioError::UnknownPreset(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        for name in PRESETS {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert_eq!(parse_scenario(&cfg.to_text()).unwrap(), cfg);
        }
        let mut cfg = ScenarioConfig::preset("paper-b").unwrap();
        cfg.scheduler.quanta[3] = 3000;
        cfg.scheduler.max_packets_per_visit = NonZeroUsize::new(1);
        cfg.scheduler.accrue_quantum_when_busy = false;
        cfg.scheduler.discipline = Discipline::RrBaseline;
        cfg.link.tuning_time = SimTime(1500);
        cfg.duration = SimTime(1_234_567_890_123);
        cfg.flows[2].mean_interframe = SimTime(16_500_001);
        cfg.output.csv = Some("out/flows.csv".into());
        assert_eq!(parse_scenario(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_omitted_knobs() {
        let mut text = String::from("mcdrr-scenario 1\n[link]\nchannels = 2\n[flows]\n");
        text.push_str("0 16 fixed 1000\n1 32 uniform 64 1518\n");
        let cfg = parse_scenario(&text).unwrap();
        assert_eq!(cfg.scheduler.quanta, vec![1518, 1518]);
        assert_eq!(cfg.scheduler.voq_capacity, 1000);
        assert_eq!(cfg.link.ifg_bytes, 12);
        assert_eq!(cfg.link.transmitters, 2);
        assert!(cfg.scheduler.accrue_quantum_when_busy);
        assert_eq!(cfg.scheduler.max_packets_per_visit, None);
    }

    #[test]
    fn fifteen_flows_for_sixteen_channels() {
        let mut cfg = ScenarioConfig::preset("paper-a").unwrap();
        cfg.flows.pop();
        let err = parse_scenario(&cfg.to_text()).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)), "{err}");
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse_scenario(""), Err(ScenarioError::Parse { .. })));
        assert!(matches!(
            parse_scenario("# nothing here\n\n"),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "mcdrr-scenario 1\n[link]\nchannels = 1\nbogus = 3\n";
        assert_eq!(
            parse_scenario(text),
            Err(ScenarioError::Parse {
                line: 4,
                reason: "unknown key \"bogus\"".into()
            })
        );
        let text = "mcdrr-scenario 1\n[flows]\n0 sixteen fixed 64\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 3, .. })));
        let text = "mcdrr-scenario 2\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 1, .. })));
        let text = "mcdrr-scenario 1\nchannels = 3\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 2, .. })));
        let text = "mcdrr-scenario 1\n[scheduler]\nname = wfq\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 3, .. })));
    }

    #[test]
    fn duplicate_flow_ids_rejected() {
        let text = "mcdrr-scenario 1\n[link]\nchannels = 2\n[flows]\n0 16 fixed 64\n0 16 fixed 64\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn scaled_decimals() {
        assert_eq!(parse_scaled("16", PS_PER_US), Ok(16_000_000));
        assert_eq!(parse_scaled("0.5", PS_PER_US), Ok(500_000));
        assert_eq!(parse_scaled("30", PS_PER_SEC), Ok(30 * PS_PER_SEC));
        assert!(parse_scaled("1.0000001", PS_PER_US).is_err());
        assert!(parse_scaled("-1", PS_PER_US).is_err());
        assert!(parse_scaled(".", PS_PER_US).is_err());
        assert_eq!(fmt_scaled(16_500_001, PS_PER_US), "16.500001");
        assert_eq!(fmt_scaled(30 * PS_PER_SEC, PS_PER_SEC), "30");
    }
}

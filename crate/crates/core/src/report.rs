//! Run reports: a per-flow CSV table and a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{jain_index, offered_load_bps, throughput_bps, Metrics};
use crate::scenario::ScenarioConfig;
use crate::sched::ScanStats;
use crate::sim::RunSummary;
use crate::time::SimTime;

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const CSV_HEADER: &str =
    "flow_id,frames_generated,frames_delivered,frames_dropped,bytes_delivered,throughput_bps,mean_delay_ns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Summary,
    Both,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow_id: usize,
    pub frames_generated: u64,
    pub frames_delivered: u64,
    pub frames_dropped: u64,
    pub frames_queued: u64,
    pub frames_in_flight: u64,
    pub bytes_delivered: u64,
    pub throughput_bps: f64,
    pub mean_delay_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub duration_s: f64,
    /// Length of the window throughput is measured over.
    pub measured_s: f64,
    pub flows: Vec<FlowReport>,
    pub aggregate_throughput_bps: f64,
    /// Absent when nothing was delivered.
    pub jain_index: Option<f64>,
    pub offered_load_bps_with_ifg: f64,
    pub offered_load_bps_without_ifg: f64,
    pub events_dispatched: u64,
    pub arrivals_dispatched: u64,
    pub completions_dispatched: u64,
    pub trace_digest: String,
    pub scan: ScanStats,
    pub mean_scan_visits: f64,
}

impl Report {
    pub fn build(
        config: &ScenarioConfig,
        metrics: &Metrics,
        summary: RunSummary,
        trace_digest: u64,
        scan: ScanStats,
    ) -> Report {
        let window = config.duration.saturating_sub(metrics.warmup());
        let flows: Vec<FlowReport> = metrics
            .flows()
            .iter()
            .map(|s| FlowReport {
                flow_id: s.flow_id,
                frames_generated: s.frames_generated,
                frames_delivered: s.frames_delivered,
                frames_dropped: s.frames_dropped,
                frames_queued: s.frames_queued,
                frames_in_flight: s.frames_in_flight,
                bytes_delivered: s.bytes_delivered,
                throughput_bps: throughput_bps(s.bytes_measured, window).unwrap_or(0.0),
                mean_delay_ns: s.mean_delay_ns(),
            })
            .collect();
        let rates: Vec<f64> = flows.iter().map(|f| f.throughput_bps).collect();
        Report {
            format_version: REPORT_FORMAT_VERSION,
            config: config.clone(),
            seed: config.master_seed,
            duration_s: config.duration.as_secs_f64(),
            measured_s: window.as_secs_f64(),
            aggregate_throughput_bps: rates.iter().sum(),
            jain_index: jain_index(&rates).ok(),
            offered_load_bps_with_ifg: offered_load_bps(&config.flows, config.link.ifg_bytes),
            offered_load_bps_without_ifg: offered_load_bps(&config.flows, 0),
            events_dispatched: summary.total(),
            arrivals_dispatched: summary.arrivals,
            completions_dispatched: summary.completions,
            trace_digest: format!("{trace_digest:016x}"),
            mean_scan_visits: if scan.scans == 0 {
                0.0
            } else {
                scan.queue_visits as f64 / scan.scans as f64
            },
            scan,
            flows,
        }
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.throughput_bps).collect()
    }

    /// Largest over smallest per-flow throughput.
    pub fn max_min_ratio(&self) -> f64 {
        let rates = self.throughputs();
        let max = rates.iter().cloned().fold(f64::MIN, f64::max);
        let min = rates.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn duration(&self) -> SimTime {
        self.config.duration
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.flows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let mut flows: Vec<&FlowReport> = self.flows.iter().collect();
        flows.sort_by_key(|f| f.flow_id);
        for f in flows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f.flow_id,
                f.frames_generated,
                f.frames_delivered,
                f.frames_dropped,
                f.bytes_delivered,
                f.throughput_bps,
                f.mean_delay_ns
            );
        }
        out
    }

    pub fn to_summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes the selected outputs into `dir` as `{stem}.csv` and
    /// `{stem}.summary.json`, returning the paths written.
    pub fn write(&self, dir: &Path, stem: &str, format: ReportFormat) -> Result<Vec<PathBuf>, ReportError> {
        let mut written = Vec::new();
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
            let path = dir.join(format!("{stem}.csv"));
            write_file(&path, &self.to_csv())?;
            written.push(path);
        }
        if matches!(format, ReportFormat::Summary | ReportFormat::Both) {
            let path = dir.join(format!("{stem}.summary.json"));
            write_file(&path, &self.to_summary_json())?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub seed: u64,
    pub jain_index: Option<f64>,
    pub aggregate_throughput_bps: f64,
    pub max_min_ratio: f64,
    pub frames_dropped: u64,
}

/// Combined view over several seeds of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub format_version: u32,
    pub runs: Vec<SweepEntry>,
}

impl SweepSummary {
    pub fn new(reports: &[Report]) -> Self {
        SweepSummary {
            format_version: REPORT_FORMAT_VERSION,
            runs: reports
                .iter()
                .map(|r| SweepEntry {
                    seed: r.seed,
                    jain_index: r.jain_index,
                    aggregate_throughput_bps: r.aggregate_throughput_bps,
                    max_min_ratio: r.max_min_ratio(),
                    frames_dropped: r.flows.iter().map(|f| f.frames_dropped).sum(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }
}

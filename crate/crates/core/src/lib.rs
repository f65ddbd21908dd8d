//! Multi-channel deficit round-robin (MCDRR) scheduling for a link of `W`
//! wavelength channels with fixed receivers and `M` tunable transmitters,
//! together with the deterministic discrete-event simulator used to measure
//! it.
//!
//! - [`sim`]: picosecond clock, ordered event queue and dispatch loop.
//! - [`link`]: channel and transmitter occupancy, frame timing.
//! - [`sched`]: the MCDRR scheduler, a plain round-robin baseline and a
//!   single-server DRR reference.
//! - [`traffic`]: seeded renewal-process frame sources.
//! - [`metrics`]: counters, throughput, offered load and Jain's index.
//! - [`scenario`], [`runner`], [`report`]: configuration, orchestration and
//!   output.

pub mod error;
pub mod link;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sched;
pub mod sim;
pub mod time;
pub mod traffic;

pub use error::SimError;
pub use link::{Frame, LinkParams, LinkState};
pub use metrics::{jain_index, offered_load_bps, throughput_bps, Scalar};
pub use report::{Report, ReportFormat};
pub use runner::{run_scenario, Simulation};
pub use scenario::{parse_scenario, ScenarioConfig, ScenarioError};
pub use sched::{Discipline, SchedulerConfig, SchedulerState};
pub use time::SimTime;

/// Scalar used for reported rates and indices.
pub type Real = f64;
/// Single-precision alternative for bulk post-processing.
pub type RealF32 = f32;
/// Exact rational scalar for reproducing published rates digit for digit.
pub type Exact = num_rational::Ratio<i128>;

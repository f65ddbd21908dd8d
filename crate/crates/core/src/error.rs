use thiserror::Error;

use crate::link::LinkError;
use crate::time::SimTime;

/// Internal failures of a simulation run. Every variant signals a logic bug
/// rather than bad user input.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("scheduler state corrupted: {0}")]
    Scheduler(String),
    #[error("invariant violated at {at}: {what}")]
    Invariant { at: SimTime, what: String },
}

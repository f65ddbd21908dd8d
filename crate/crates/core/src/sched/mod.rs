//! Multi-channel deficit round-robin over per-channel VOQs.
//!
//! Each channel has a fixed receiver, so a VOQ whose previous batch is still
//! on the wire (`num_pkts_scheduled > 0`) cannot be served again; the scan
//! skips it and the round carries on with the next queue. A later round can
//! therefore start while an earlier one is still transmitting.
//!
//! A queue is selected only when its deficit, after the quantum has been
//! added, covers its head-of-line frame. The selected queue then commits as
//! many frames from its head as the deficit pays for, and those frames are
//! sent back to back on its channel by the transmitter that picked it.

mod reference;
mod voq;

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use reference::{reference_drr_trace, ServiceRecord};
pub use voq::{EnqueueOutcome, Voq, DEFAULT_VOQ_CAPACITY};

use crate::error::SimError;
use crate::link::{Frame, LinkState, MAX_FRAME_BYTES};
use crate::time::SimTime;

pub const DEFAULT_QUANTUM: u64 = MAX_FRAME_BYTES as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Discipline {
    #[serde(rename = "mcdrr")]
    Mcdrr,
    /// One frame per visit, no deficit accounting.
    #[serde(rename = "rr-baseline")]
    RrBaseline,
}

impl Discipline {
    pub fn name(&self) -> &'static str {
        match self {
            Discipline::Mcdrr => "mcdrr",
            Discipline::RrBaseline => "rr-baseline",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Discipline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mcdrr" => Ok(Discipline::Mcdrr),
            "rr-baseline" => Ok(Discipline::RrBaseline),
            other => Err(format!("unknown scheduler {other:?} (expected mcdrr or rr-baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub discipline: Discipline,
    /// Per-queue quantum in bytes, one entry per channel.
    pub quanta: Vec<u64>,
    /// `None` means a visit commits as many frames as the deficit covers.
    pub max_packets_per_visit: Option<NonZeroUsize>,
    pub accrue_quantum_when_busy: bool,
    pub voq_capacity: usize,
}

impl SchedulerConfig {
    pub fn new(channels: usize) -> Self {
        SchedulerConfig {
            discipline: Discipline::Mcdrr,
            quanta: vec![DEFAULT_QUANTUM; channels],
            max_packets_per_visit: None,
            accrue_quantum_when_busy: true,
            voq_capacity: DEFAULT_VOQ_CAPACITY,
        }
    }

    pub fn with_quantum(mut self, quantum: u64) -> Self {
        self.quanta.iter_mut().for_each(|q| *q = quantum);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DequeueResult {
    pub channel: usize,
    pub frames_scheduled: usize,
}

/// A frame put on the wire; the caller schedules its completion event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub transmitter: usize,
    pub channel: usize,
    pub frame_id: u64,
    pub start: SimTime,
    pub completion: SimTime,
}

/// One step of a dequeue scan or a deficit reset, for trace inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Served {
        queue: usize,
        frames: usize,
        deficit: u64,
    },
    SkippedDeficit { queue: usize, deficit: u64 },
    SkippedBusy { queue: usize, deficit: u64 },
    DeficitReset { queue: usize, from: u64 },
    NothingEligible,
}

/// Receives frames leaving the scheduler.
pub trait FrameObserver {
    fn frame_dropped(&mut self, _frame: &Frame, _now: SimTime) {}
    fn frame_delivered(&mut self, _frame: &Frame, _now: SimTime) {}
}

impl FrameObserver for () {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    pub scans: u64,
    pub queue_visits: u64,
    pub max_visits: u64,
}

#[derive(Debug, Clone)]
pub struct SchedulerState {
    voqs: Vec<Voq>,
    current_queue_index: usize,
    discipline: Discipline,
    max_packets_per_visit: Option<NonZeroUsize>,
    accrue_quantum_when_busy: bool,
    stats: ScanStats,
    decisions: Option<Vec<Decision>>,
}

impl SchedulerState {
    pub fn new(config: &SchedulerConfig) -> Self {
        assert!(!config.quanta.is_empty(), "at least one channel");
        assert!(config.quanta.iter().all(|&q| q > 0), "quanta must be positive");
        let voqs: Vec<Voq> = config
            .quanta
            .iter()
            .enumerate()
            .map(|(ch, &q)| Voq::new(ch, config.voq_capacity, q))
            .collect();
        SchedulerState {
            current_queue_index: voqs.len() - 1,
            voqs,
            discipline: config.discipline,
            max_packets_per_visit: config.max_packets_per_visit,
            accrue_quantum_when_busy: config.accrue_quantum_when_busy,
            stats: ScanStats::default(),
            decisions: None,
        }
    }

    /// Start keeping a log of every scan step and deficit reset.
    pub fn record_decisions(&mut self) {
        self.decisions.get_or_insert_with(Vec::new);
    }

    pub fn decisions(&self) -> &[Decision] {
        self.decisions.as_deref().unwrap_or(&[])
    }

    pub fn voqs(&self) -> &[Voq] {
        &self.voqs
    }

    pub fn voq(&self, channel: usize) -> &Voq {
        &self.voqs[channel]
    }

    pub fn current_queue_index(&self) -> usize {
        self.current_queue_index
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    pub fn scan_stats(&self) -> ScanStats {
        self.stats
    }

    fn log(&mut self, d: Decision) {
        if let Some(log) = self.decisions.as_mut() {
            log.push(d);
        }
    }

    pub fn enqueue(&mut self, channel: usize, mut frame: Frame, now: SimTime) -> EnqueueOutcome {
        frame.t_enqueued = now;
        self.voqs[channel].push(frame)
    }

    fn begin_scan(&mut self) -> usize {
        self.stats.scans += 1;
        (self.current_queue_index + 1) % self.voqs.len()
    }

    fn end_scan(&mut self, visits: u64) {
        self.stats.queue_visits += visits;
        self.stats.max_visits = self.stats.max_visits.max(visits);
    }

    /// One MCDRR scan over at most `W` queues.
    pub fn dequeue(&mut self) -> Option<DequeueResult> {
        let w = self.voqs.len();
        let start = self.begin_scan();
        let mut visits = 0;
        for i in 0..w {
            let idx = (start + i) % w;
            visits += 1;
            let accrue_busy = self.accrue_quantum_when_busy;
            let voq = &mut self.voqs[idx];
            let Some(head) = voq.frames.front() else {
                continue;
            };
            let head_size = head.size_bytes as u64;
            let eligible = voq.num_pkts_scheduled == 0;
            if eligible || accrue_busy {
                voq.dc += voq.quantum;
            }
            let deficit = voq.dc;
            if !eligible {
                self.log(Decision::SkippedBusy { queue: idx, deficit });
                continue;
            }
            if deficit < head_size {
                self.log(Decision::SkippedDeficit { queue: idx, deficit });
                continue;
            }

            let limit = self.max_packets_per_visit.map_or(usize::MAX, NonZeroUsize::get);
            let mut count = 0;
            while count < limit {
                match voq.frames.get(count) {
                    Some(f) if f.size_bytes as u64 <= voq.dc => {
                        voq.dc -= f.size_bytes as u64;
                        count += 1;
                    }
                    _ => break,
                }
            }
            voq.num_pkts_scheduled = count;
            let deficit = voq.dc;
            self.current_queue_index = idx;
            self.log(Decision::Served {
                queue: idx,
                frames: count,
                deficit,
            });
            self.end_scan(visits);
            return Some(DequeueResult {
                channel: idx,
                frames_scheduled: count,
            });
        }
        self.log(Decision::NothingEligible);
        self.end_scan(visits);
        None
    }

    /// Plain round-robin: the first non-empty idle queue sends one frame.
    pub fn baseline_rr_dequeue(&mut self) -> Option<DequeueResult> {
        let w = self.voqs.len();
        let start = self.begin_scan();
        let mut visits = 0;
        for i in 0..w {
            let idx = (start + i) % w;
            visits += 1;
            let voq = &mut self.voqs[idx];
            if voq.frames.is_empty() {
                continue;
            }
            if voq.num_pkts_scheduled > 0 {
                let deficit = voq.dc;
                self.log(Decision::SkippedBusy { queue: idx, deficit });
                continue;
            }
            voq.num_pkts_scheduled = 1;
            self.current_queue_index = idx;
            self.log(Decision::Served {
                queue: idx,
                frames: 1,
                deficit: 0,
            });
            self.end_scan(visits);
            return Some(DequeueResult {
                channel: idx,
                frames_scheduled: 1,
            });
        }
        self.log(Decision::NothingEligible);
        self.end_scan(visits);
        None
    }

    fn select(&mut self) -> Option<DequeueResult> {
        match self.discipline {
            Discipline::Mcdrr => self.dequeue(),
            Discipline::RrBaseline => self.baseline_rr_dequeue(),
        }
    }

    fn reset_if_empty(&mut self, channel: usize) {
        if let Some(from) = self.voqs[channel].reset_if_empty() {
            self.log(Decision::DeficitReset {
                queue: channel,
                from,
            });
        }
    }

    /// Puts the head of `channel`'s VOQ on the wire.
    fn send_head(
        &mut self,
        link: &mut LinkState,
        channel: usize,
        transmitter: usize,
        now: SimTime,
    ) -> Result<Transmission, SimError> {
        let frame = self.voqs[channel].frames.front_mut().ok_or_else(|| {
            SimError::Scheduler(format!("send on channel {channel} with an empty VOQ"))
        })?;
        let completion = link.begin_transmission(frame, channel, transmitter, now)?;
        let tx = Transmission {
            transmitter,
            channel,
            frame_id: frame.id,
            start: frame.t_tx_start.unwrap_or(now),
            completion,
        };
        self.reset_if_empty(channel);
        Ok(tx)
    }

    /// Enqueues `frame`; if it was accepted and a transmitter is idle, runs a
    /// single dequeue and starts the selected queue's head frame.
    pub fn on_arrival<O: FrameObserver>(
        &mut self,
        link: &mut LinkState,
        frame: Frame,
        now: SimTime,
        observer: &mut O,
    ) -> Result<Option<Transmission>, SimError> {
        let channel = frame.channel;
        if channel >= self.voqs.len() {
            return Err(SimError::Scheduler(format!("arrival for unknown channel {channel}")));
        }
        if let EnqueueOutcome::Dropped(frame) = self.enqueue(channel, frame, now) {
            observer.frame_dropped(&frame, now);
            return Ok(None);
        }
        let Some(transmitter) = link.acquire_transmitter() else {
            return Ok(None);
        };
        match self.select() {
            Some(sel) => self.send_head(link, sel.channel, transmitter, now).map(Some),
            None => Ok(None),
        }
    }

    /// Completes the in-flight frame on `channel`, then either continues the
    /// channel's batch on the same transmitter or runs a dequeue for it.
    pub fn on_departure<O: FrameObserver>(
        &mut self,
        link: &mut LinkState,
        channel: usize,
        transmitter: usize,
        now: SimTime,
        observer: &mut O,
    ) -> Result<Option<Transmission>, SimError> {
        let voq = self
            .voqs
            .get_mut(channel)
            .ok_or_else(|| SimError::Scheduler(format!("departure on unknown channel {channel}")))?;
        if voq.num_pkts_scheduled == 0 {
            return Err(SimError::Scheduler(format!(
                "departure on channel {channel} with nothing scheduled"
            )));
        }
        let mut frame = voq.frames.pop_front().ok_or_else(|| {
            SimError::Scheduler(format!("departure on channel {channel} with an empty VOQ"))
        })?;
        voq.num_pkts_scheduled -= 1;
        let more = voq.num_pkts_scheduled > 0;
        link.end_transmission(transmitter, channel, now)?;
        frame.t_delivered = Some(now);
        self.frame_popped_is_delivered(&frame, now, observer);

        if more {
            return self.send_head(link, channel, transmitter, now).map(Some);
        }
        self.reset_if_empty(channel);
        match self.select() {
            Some(sel) => self.send_head(link, sel.channel, transmitter, now).map(Some),
            None => Ok(None),
        }
    }

    pub fn frame_popped_is_delivered<O: FrameObserver>(
        &self,
        frame: &Frame,
        now: SimTime,
        observer: &mut O,
    ) {
        observer.frame_delivered(frame, now);
    }

    /// Checks the per-queue invariants against the link occupancy. Valid only
    /// between events.
    pub fn check_invariants(&self, link: &LinkState) -> Result<(), String> {
        for voq in &self.voqs {
            let ch = voq.channel;
            if voq.frames.len() > voq.capacity {
                return Err(format!("VOQ {ch} holds {} > capacity", voq.frames.len()));
            }
            if voq.num_pkts_scheduled > voq.frames.len() {
                return Err(format!(
                    "VOQ {ch}: {} scheduled but only {} queued",
                    voq.num_pkts_scheduled,
                    voq.frames.len()
                ));
            }
            if link.channel(ch).busy != (voq.num_pkts_scheduled > 0) {
                return Err(format!(
                    "channel {ch} busy={} but {} frames scheduled",
                    link.channel(ch).busy,
                    voq.num_pkts_scheduled
                ));
            }
            if voq.frames.is_empty() && voq.dc != 0 {
                return Err(format!("VOQ {ch} is empty with deficit {}", voq.dc));
            }
            // Only the head of a scheduled prefix can be on the wire, and
            // only the front of the queue is ever handed to the link.
            for (pos, f) in voq.frames.iter().enumerate().take(2) {
                let on_wire = pos == 0 && voq.num_pkts_scheduled > 0;
                if f.t_tx_start.is_some() != on_wire {
                    return Err(format!("VOQ {ch}: frame {} at position {pos} has wrong wire state", f.id));
                }
                if f.channel != ch {
                    return Err(format!("VOQ {ch} holds frame for channel {}", f.channel));
                }
            }
        }
        Ok(())
    }
}

//! Discrete-event engine: a picosecond clock, a deterministic event queue and
//! the dispatch loop.
//!
//! Events at the same instant are ordered by class (transmission completions
//! first, then flow arrivals) and then by insertion sequence number, so a run
//! is fully determined by the order in which handlers schedule work.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::SimError;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    FlowArrival { flow: usize },
    TxCompletion { transmitter: usize, channel: usize },
}

impl EventKind {
    /// Tie-break class at equal timestamps; lower dispatches first.
    pub fn class(&self) -> u8 {
        match self {
            EventKind::TxCompletion { .. } => 0,
            EventKind::FlowArrival { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.time, self.kind.class(), self.seq)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-ordered pending event set.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        self.heap.push(Reverse(event));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn peek(&self) -> Option<&Event> {
        self.heap.peek().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Callbacks for both event kinds. Handlers may schedule further events
/// through the engine they are handed.
pub trait EventHandler {
    fn on_flow_arrival(&mut self, engine: &mut Engine, flow: usize) -> Result<(), SimError>;

    fn on_tx_completion(
        &mut self,
        engine: &mut Engine,
        transmitter: usize,
        channel: usize,
    ) -> Result<(), SimError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub arrivals: u64,
    pub completions: u64,
    /// Clock value when the loop stopped.
    pub clock: SimTime,
}

impl RunSummary {
    pub fn total(&self) -> u64 {
        self.arrivals + self.completions
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug)]
pub struct Engine {
    clock: SimTime,
    queue: EventQueue,
    next_seq: u64,
    dispatched: u64,
    trace_digest: u64,
    trace: Option<Vec<Event>>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine {
            clock: SimTime::ZERO,
            queue: EventQueue::new(),
            next_seq: 0,
            dispatched: 0,
            trace_digest: FNV_OFFSET,
            trace: None,
        }
    }

    /// Keep a full copy of every dispatched event. Only sensible for short runs.
    pub fn record_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    /// Inserts an event, assigning it the next sequence number.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64, SimError> {
        if time < self.clock {
            return Err(SimError::ScheduledInPast {
                at: time,
                now: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event { time, seq, kind });
        Ok(seq)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn peek(&self) -> Option<&Event> {
        self.queue.peek()
    }

    pub fn scheduled_total(&self) -> u64 {
        self.next_seq
    }

    pub fn dispatched_total(&self) -> u64 {
        self.dispatched
    }

    /// FNV-1a digest over every dispatched event's (time, kind, ids, seq).
    pub fn trace_digest(&self) -> u64 {
        self.trace_digest
    }

    pub fn trace(&self) -> Option<&[Event]> {
        self.trace.as_deref()
    }

    fn absorb(&mut self, event: &Event) {
        let (a, b) = match event.kind {
            EventKind::FlowArrival { flow } => (flow as u64, u64::MAX),
            EventKind::TxCompletion {
                transmitter,
                channel,
            } => (transmitter as u64, channel as u64),
        };
        let mut h = self.trace_digest;
        for word in [
            event.time.as_ps(),
            event.kind.class() as u64,
            a,
            b,
            event.seq,
        ] {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
        }
        self.trace_digest = h;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(*event);
        }
    }

    /// Dispatches events in order until the queue drains or the next event
    /// lies beyond `until`. Events past the horizon stay pending.
    pub fn run<H: EventHandler>(
        &mut self,
        until: SimTime,
        handler: &mut H,
    ) -> Result<RunSummary, SimError> {
        let mut summary = RunSummary::default();
        while let Some(next) = self.queue.peek() {
            if next.time > until {
                break;
            }
            let event = self.queue.pop().expect("peeked event");
            assert!(
                event.time >= self.clock,
                "clock went backwards: {} < {}",
                event.time,
                self.clock
            );
            self.clock = event.time;
            self.dispatched += 1;
            self.absorb(&event);
            match event.kind {
                EventKind::FlowArrival { flow } => {
                    summary.arrivals += 1;
                    handler.on_flow_arrival(self, flow)?;
                }
                EventKind::TxCompletion {
                    transmitter,
                    channel,
                } => {
                    summary.completions += 1;
                    handler.on_tx_completion(self, transmitter, channel)?;
                }
            }
        }
        summary.clock = self.clock;
        Ok(summary)
    }
}

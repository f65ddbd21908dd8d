use std::collections::VecDeque;

use serde::Serialize;

use crate::link::Frame;

pub const DEFAULT_VOQ_CAPACITY: usize = 1000;

/// Virtual output queue for one channel together with its deficit
/// round-robin counters.
///
/// Frames stay in the queue while they are on the wire; the first
/// `num_pkts_scheduled` frames are the ones committed to transmission.
#[derive(Debug, Clone, Serialize)]
pub struct Voq {
    pub channel: usize,
    pub(crate) frames: VecDeque<Frame>,
    pub capacity: usize,
    /// Deficit counter in bytes.
    pub dc: u64,
    pub quantum: u64,
    pub num_pkts_scheduled: usize,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped(Frame),
}

impl Voq {
    pub fn new(channel: usize, capacity: usize, quantum: u64) -> Self {
        Voq {
            channel,
            frames: VecDeque::with_capacity(capacity.min(1024)),
            capacity,
            dc: 0,
            quantum,
            num_pkts_scheduled: 0,
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn head(&self) -> Option<&Frame> {
        self.frames.front()
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }

    /// Tail-drop enqueue.
    pub fn push(&mut self, frame: Frame) -> EnqueueOutcome {
        if self.frames.len() >= self.capacity {
            self.dropped += 1;
            return EnqueueOutcome::Dropped(frame);
        }
        self.frames.push_back(frame);
        EnqueueOutcome::Accepted
    }

    /// Drops the deficit if nothing is left to serve.
    pub(crate) fn reset_if_empty(&mut self) -> Option<u64> {
        if self.frames.is_empty() && self.dc != 0 {
            let old = self.dc;
            self.dc = 0;
            Some(old)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn frame(id: u64) -> Frame {
        Frame::new(id, 0, 100, SimTime::ZERO).unwrap()
    }

    #[test]
    fn accepts_into_empty_queue() {
        let mut q = Voq::new(0, DEFAULT_VOQ_CAPACITY, 1518);
        assert_eq!(q.push(frame(0)), EnqueueOutcome::Accepted);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn tail_drop_at_capacity() {
        let mut q = Voq::new(0, DEFAULT_VOQ_CAPACITY, 1518);
        let outcomes: Vec<_> = (0..1001).map(|i| q.push(frame(i))).collect();
        assert!(outcomes[..1000].iter().all(|o| *o == EnqueueOutcome::Accepted));
        assert_eq!(outcomes[1000], EnqueueOutcome::Dropped(frame(1000)));
        assert_eq!(q.len(), 1000);
        assert_eq!(q.dropped, 1);
        assert_eq!(q.head().unwrap().id, 0);
    }
}

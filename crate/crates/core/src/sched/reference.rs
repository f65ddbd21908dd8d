//! Single-server deficit round-robin, written independently of the
//! multi-channel scheduler so the two can be compared frame for frame.
//!
//! Queues are visited in cyclic index order, skipping empty ones. On each
//! visit the queue earns its quantum and then sends, back to back, the
//! frames present at that moment for as long as the deficit covers the next
//! head. A queue that is empty when its turn ends loses its deficit. The
//! server never idles while any queue holds a frame.
//!
//! Timing follows the event engine's conventions: a completion at time `t`
//! is handled before an arrival at `t`, and when the server is idle a single
//! arrival triggers service before the next arrival is admitted.

use std::collections::VecDeque;

use crate::link::transmission_duration;
use crate::time::SimTime;
use crate::traffic::ScriptedArrival;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceRecord {
    pub queue: usize,
    /// Index of the frame in the arrival list.
    pub frame: usize,
    pub start: SimTime,
}

pub fn reference_drr_trace(
    queues: usize,
    quantum: u64,
    arrivals: &[ScriptedArrival],
    line_rate_bps: u64,
    ifg_bytes: u32,
) -> Vec<ServiceRecord> {
    assert!(queues > 0 && quantum > 0);
    assert!(
        arrivals.windows(2).all(|w| w[0].time <= w[1].time),
        "arrivals must be sorted by time"
    );
    let mut backlog: Vec<VecDeque<(usize, u32)>> = vec![VecDeque::new(); queues];
    let mut deficit = vec![0u64; queues];
    let mut last_served = queues - 1;
    let mut next = 0;
    let mut now = SimTime::ZERO;
    let mut out = Vec::with_capacity(arrivals.len());

    let admit = |backlog: &mut Vec<VecDeque<(usize, u32)>>, next: &mut usize| {
        let a = &arrivals[*next];
        backlog[a.channel].push_back((*next, a.size_bytes));
        *next += 1;
    };

    loop {
        while next < arrivals.len() && arrivals[next].time < now {
            admit(&mut backlog, &mut next);
        }
        if backlog.iter().all(VecDeque::is_empty) {
            if next == arrivals.len() {
                break;
            }
            now = arrivals[next].time;
            admit(&mut backlog, &mut next);
        }

        // Keep cycling until some queue can pay for its head frame.
        let mut q = last_served;
        let batch: Vec<(usize, u32)> = loop {
            q = (q + 1) % queues;
            let Some(&(_, head)) = backlog[q].front() else {
                continue;
            };
            deficit[q] += quantum;
            if deficit[q] < head as u64 {
                continue;
            }
            let mut taken = Vec::new();
            while let Some(&(id, size)) = backlog[q].front() {
                if size as u64 > deficit[q] {
                    break;
                }
                deficit[q] -= size as u64;
                taken.push((id, size));
                backlog[q].pop_front();
            }
            break taken;
        };
        last_served = q;
        for (frame, size) in batch {
            out.push(ServiceRecord {
                queue: q,
                frame,
                start: now,
            });
            now += transmission_duration(size, ifg_bytes, line_rate_bps);
        }
        while next < arrivals.len() && arrivals[next].time < now {
            admit(&mut backlog, &mut next);
        }
        if backlog[q].is_empty() {
            deficit[q] = 0;
        }
    }
    out
}

//! Per-flow counters and the aggregate figures derived from them.
//!
//! The rate formulas are generic over [`Scalar`], so they can be evaluated in
//! `f64` for reports or in exact rationals when a published value has to be
//! matched to the last digit.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

use crate::link::Frame;
use crate::sched::FrameObserver;
use crate::time::{SimTime, PS_PER_SEC};
use crate::traffic::FlowSpec;

/// Number type the metric formulas are evaluated in.
pub trait Scalar: Num + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("throughput over a zero-length interval")]
    ZeroDuration,
    #[error("fairness index needs at least one positive value")]
    NoPositiveValue,
    #[error("fairness index input contains a negative value")]
    NegativeValue,
}

fn lift<T: Scalar>(v: u64) -> T {
    T::from_u64(v).expect("value representable in scalar type")
}

/// Delivered frame bits per second of `duration`.
pub fn throughput_bps<T: Scalar>(bytes_delivered: u64, duration: SimTime) -> Result<T, MetricsError> {
    if duration == SimTime::ZERO {
        return Err(MetricsError::ZeroDuration);
    }
    let bits: T = lift::<T>(bytes_delivered) * lift(8);
    Ok(bits * lift(PS_PER_SEC) / lift(duration.as_ps()))
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`.
pub fn jain_index<T: Scalar>(values: &[T]) -> Result<T, MetricsError> {
    let zero = T::zero();
    if values.iter().any(|&v| v < zero) {
        return Err(MetricsError::NegativeValue);
    }
    if !values.iter().any(|&v| v > zero) {
        return Err(MetricsError::NoPositiveValue);
    }
    let (sum, sum_sq) = values
        .iter()
        .fold((zero, zero), |(s, q), &v| (s + v, q + v * v));
    Ok(sum * sum / (lift::<T>(values.len() as u64) * sum_sq))
}

/// Long-run offered bit rate of `flows`, counting `ifg_bytes` of gap per frame.
pub fn offered_load_bps<T: Scalar>(flows: &[FlowSpec], ifg_bytes: u32) -> T {
    flows.iter().fold(T::zero(), |acc, f| {
        let (num, den) = f.size.mean_bytes_ratio();
        let bits_num: T = lift::<T>(num + ifg_bytes as u64 * den) * lift(8) * lift(PS_PER_SEC);
        let bits_den: T = lift::<T>(den) * lift(f.mean_interframe.as_ps());
        acc + bits_num / bits_den
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlowStats {
    pub flow_id: usize,
    pub frames_generated: u64,
    pub frames_delivered: u64,
    pub frames_dropped: u64,
    pub bytes_delivered: u64,
    /// Bytes delivered at or after the end of the warm-up window.
    pub bytes_measured: u64,
    pub sum_delay: SimTime,
    /// Still waiting in the VOQ when the run stopped.
    pub frames_queued: u64,
    /// On the wire when the run stopped.
    pub frames_in_flight: u64,
}

impl FlowStats {
    pub fn new(flow_id: usize) -> Self {
        FlowStats {
            flow_id,
            ..Default::default()
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.frames_generated
            == self.frames_delivered + self.frames_dropped + self.frames_queued + self.frames_in_flight
    }

    pub fn mean_delay_ns(&self) -> f64 {
        if self.frames_delivered == 0 {
            0.0
        } else {
            self.sum_delay.as_ns_f64() / self.frames_delivered as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Metrics {
    flows: Vec<FlowStats>,
    warmup: SimTime,
}

impl Metrics {
    pub fn new(flows: usize, warmup: SimTime) -> Self {
        Metrics {
            flows: (0..flows).map(FlowStats::new).collect(),
            warmup,
        }
    }

    pub fn flows(&self) -> &[FlowStats] {
        &self.flows
    }

    pub fn flow_mut(&mut self, flow: usize) -> &mut FlowStats {
        &mut self.flows[flow]
    }

    pub fn warmup(&self) -> SimTime {
        self.warmup
    }

    pub fn record_generated(&mut self, frame: &Frame) {
        self.flows[frame.channel].frames_generated += 1;
    }

    pub fn record_dropped(&mut self, frame: &Frame) {
        self.flows[frame.channel].frames_dropped += 1;
    }

    pub fn record_delivered(&mut self, frame: &Frame, now: SimTime) {
        let stats = &mut self.flows[frame.channel];
        stats.frames_delivered += 1;
        stats.bytes_delivered += frame.size_bytes as u64;
        if now >= self.warmup {
            stats.bytes_measured += frame.size_bytes as u64;
        }
        stats.sum_delay += now - frame.t_created;
    }

    pub fn is_conserved(&self) -> bool {
        self.flows.iter().all(FlowStats::is_conserved)
    }
}

impl FrameObserver for Metrics {
    fn frame_dropped(&mut self, frame: &Frame, _now: SimTime) {
        self.record_dropped(frame);
    }

    fn frame_delivered(&mut self, frame: &Frame, now: SimTime) {
        self.record_delivered(frame, now);
    }
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;

    use super::*;
    use crate::traffic::{scenario_a_flows, scenario_b_flows, SizeDist};

    type Exact = Ratio<i128>;

    fn exact(n: i128, d: i128) -> Exact {
        Ratio::new(n, d)
    }

    #[test]
    fn gigabit_second() {
        let t: f64 = throughput_bps(125_000_000, SimTime::from_secs(1)).unwrap();
        assert_eq!(t, 1e9);
        let z: f64 = throughput_bps(0, SimTime::from_secs(1)).unwrap();
        assert_eq!(z, 0.0);
        assert_eq!(
            throughput_bps::<f64>(1, SimTime::ZERO),
            Err(MetricsError::ZeroDuration)
        );
    }

    #[test]
    fn jain_closed_forms() {
        assert_eq!(jain_index(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(jain_index(&[exact(3, 1), exact(1, 1)]).unwrap(), exact(4, 5));
        assert_eq!(
            jain_index(&[exact(1, 1), exact(1, 1), exact(1, 1), exact(0, 1)]).unwrap(),
            exact(3, 4)
        );
        assert!((jain_index(&[3.0f32, 1.0]).unwrap() - 0.8).abs() < 1e-6);
    }

    #[test]
    fn jain_domain_errors() {
        assert_eq!(jain_index(&[0.0, 0.0]), Err(MetricsError::NoPositiveValue));
        assert_eq!(jain_index::<f64>(&[]), Err(MetricsError::NoPositiveValue));
        assert_eq!(jain_index(&[1.0, -1.0]), Err(MetricsError::NegativeValue));
    }

    #[test]
    fn offered_load_scenario_a() {
        let load: Exact = offered_load_bps(&scenario_a_flows(), 12);
        // (791 + 12) * 8 bits per 16 us plus 15 flows per 48 us
        let expected = exact(803 * 8, 16) * exact(1_000_000, 1)
            + exact(15 * 803 * 8, 48) * exact(1_000_000, 1);
        assert_eq!(load, expected);
        let f: f64 = offered_load_bps(&scenario_a_flows(), 12);
        assert!((f / 2.409e9 - 1.0).abs() < 1e-3, "{f}");
    }

    #[test]
    fn offered_load_scenario_b_without_gap_is_exact() {
        let load: Exact = offered_load_bps(&scenario_b_flows(), 0);
        assert_eq!(load, exact(2_375_000_000, 1));
    }

    #[test]
    fn offered_load_single_fixed_flow() {
        let flow = FlowSpec {
            flow_id: 0,
            mean_interframe: SimTime::from_us(16),
            size: SizeDist::Fixed { bytes: 1000 },
        };
        let load: Exact = offered_load_bps(&[flow], 12);
        assert_eq!(load, exact(506_000_000, 1));
    }

    #[test]
    fn delivery_accumulates_delay() {
        let mut m = Metrics::new(1, SimTime::ZERO);
        let f = Frame::new(0, 0, 500, SimTime::ZERO).unwrap();
        m.record_generated(&f);
        m.record_delivered(&f, SimTime::from_us(10));
        let s = &m.flows()[0];
        assert_eq!(s.bytes_delivered, 500);
        assert_eq!(s.sum_delay, SimTime::from_us(10));
        assert_eq!(s.frames_delivered, 1);
        assert!(m.is_conserved());
    }

    #[test]
    fn drop_counts_frames_not_bytes() {
        let mut m = Metrics::new(1, SimTime::ZERO);
        let f = Frame::new(0, 0, 500, SimTime::ZERO).unwrap();
        m.record_generated(&f);
        m.record_dropped(&f);
        let s = &m.flows()[0];
        assert_eq!((s.frames_generated, s.frames_dropped, s.bytes_delivered), (1, 1, 0));
    }

    #[test]
    fn warmup_excludes_early_bytes() {
        let mut m = Metrics::new(1, SimTime::from_us(5));
        let f = Frame::new(0, 0, 100, SimTime::ZERO).unwrap();
        m.record_delivered(&f, SimTime::from_us(1));
        m.record_delivered(&f, SimTime::from_us(5));
        assert_eq!(m.flows()[0].bytes_delivered, 200);
        assert_eq!(m.flows()[0].bytes_measured, 100);
    }
}

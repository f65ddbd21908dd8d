//! Renewal-process frame sources: exponential interframe times with a
//! per-flow mean and uniform or fixed frame sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{MAX_FRAME_BYTES, MIN_FRAME_BYTES};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SizeDist {
    Uniform { min_bytes: u32, max_bytes: u32 },
    Fixed { bytes: u32 },
}

impl SizeDist {
    /// Mean size as a (numerator, denominator) pair in bytes.
    pub fn mean_bytes_ratio(&self) -> (u64, u64) {
        match *self {
            SizeDist::Uniform {
                min_bytes,
                max_bytes,
            } => (min_bytes as u64 + max_bytes as u64, 2),
            SizeDist::Fixed { bytes } => (bytes as u64, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    /// Also the destination channel.
    pub flow_id: usize,
    pub mean_interframe: SimTime,
    pub size: SizeDist,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowSpecError {
    #[error("flow {0}: mean interframe time must be positive")]
    ZeroMean(usize),
    #[error("flow {flow}: frame size {bytes} outside [{MIN_FRAME_BYTES}, {MAX_FRAME_BYTES}]")]
    SizeOutOfRange { flow: usize, bytes: u32 },
    #[error("flow {flow}: uniform range {min}..={max} is empty")]
    EmptyRange { flow: usize, min: u32, max: u32 },
}

impl FlowSpec {
    pub fn validate(&self) -> Result<(), FlowSpecError> {
        let flow = self.flow_id;
        if self.mean_interframe == SimTime::ZERO {
            return Err(FlowSpecError::ZeroMean(flow));
        }
        let bounds = match self.size {
            SizeDist::Uniform {
                min_bytes,
                max_bytes,
            } => {
                if min_bytes > max_bytes {
                    return Err(FlowSpecError::EmptyRange {
                        flow,
                        min: min_bytes,
                        max: max_bytes,
                    });
                }
                [min_bytes, max_bytes]
            }
            SizeDist::Fixed { bytes } => [bytes, bytes],
        };
        for bytes in bounds {
            if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&bytes) {
                return Err(FlowSpecError::SizeOutOfRange { flow, bytes });
            }
        }
        Ok(())
    }
}

/// Independent, reproducible stream for one flow. The master seed keys the
/// generator and the flow id selects a ChaCha stream, so a flow's draws do
/// not depend on any other flow.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(master_seed: u64, flow_id: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(flow_id as u64);
        RngStream(rng)
    }

    /// Uniform on (0, 1].
    pub fn unit_open_closed(&mut self) -> f64 {
        1.0 - self.0.random::<f64>()
    }

    pub fn uniform_inclusive(&mut self, min: u32, max: u32) -> u32 {
        self.0.random_range(min..=max)
    }
}

/// Inverse-CDF exponential variate for a given `u` in (0, 1], rounded to
/// whole picoseconds and never below 1 ps.
pub fn interframe_from_uniform(mean: SimTime, u: f64) -> SimTime {
    debug_assert!(u > 0.0 && u <= 1.0);
    let ps = (-(mean.as_ps() as f64) * u.ln()).round();
    SimTime((ps as u64).max(1))
}

pub fn sample_interframe(spec: &FlowSpec, rng: &mut RngStream) -> SimTime {
    interframe_from_uniform(spec.mean_interframe, rng.unit_open_closed())
}

pub fn sample_frame_size(spec: &FlowSpec, rng: &mut RngStream) -> u32 {
    match spec.size {
        SizeDist::Uniform {
            min_bytes,
            max_bytes,
        } => rng.uniform_inclusive(min_bytes, max_bytes),
        SizeDist::Fixed { bytes } => bytes,
    }
}

/// A flow's spec with its private random stream.
#[derive(Debug, Clone)]
pub struct FlowGenerator {
    spec: FlowSpec,
    rng: RngStream,
}

impl FlowGenerator {
    pub fn new(spec: FlowSpec, master_seed: u64) -> Self {
        let rng = RngStream::new(master_seed, spec.flow_id);
        FlowGenerator { spec, rng }
    }

    pub fn spec(&self) -> &FlowSpec {
        &self.spec
    }

    pub fn next_gap(&mut self) -> SimTime {
        sample_interframe(&self.spec, &mut self.rng)
    }

    pub fn next_size(&mut self) -> u32 {
        sample_frame_size(&self.spec, &mut self.rng)
    }
}

/// One frame of a fixed, precomputed arrival list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedArrival {
    pub time: SimTime,
    pub channel: usize,
    pub size_bytes: u32,
}

const ETHERNET_RANGE: SizeDist = SizeDist::Uniform {
    min_bytes: MIN_FRAME_BYTES,
    max_bytes: MAX_FRAME_BYTES,
};

fn sixteen_flows(first: (SimTime, SizeDist), rest: (SimTime, SizeDist)) -> Vec<FlowSpec> {
    (0..16)
        .map(|flow_id| {
            let (mean_interframe, size) = if flow_id == 0 { first } else { rest };
            FlowSpec {
                flow_id,
                mean_interframe,
                size,
            }
        })
        .collect()
}

/// Uniform 64..=1518 byte frames; flow 0 every 16 us on average, the others
/// every 48 us.
pub fn scenario_a_flows() -> Vec<FlowSpec> {
    sixteen_flows(
        (SimTime::from_us(16), ETHERNET_RANGE),
        (SimTime::from_us(48), ETHERNET_RANGE),
    )
}

/// Fixed sizes; flow 0 sends 1000-byte frames every 16 us on average, the
/// others 500-byte frames every 32 us.
pub fn scenario_b_flows() -> Vec<FlowSpec> {
    sixteen_flows(
        (SimTime::from_us(16), SizeDist::Fixed { bytes: 1000 }),
        (SimTime::from_us(32), SizeDist::Fixed { bytes: 500 }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_mean_converges() {
        let spec = FlowSpec {
            flow_id: 0,
            mean_interframe: SimTime::from_us(16),
            size: SizeDist::Fixed { bytes: 64 },
        };
        let mut rng = RngStream::new(7, 0);
        let n = 1_000_000u64;
        let total: u128 = (0..n)
            .map(|_| sample_interframe(&spec, &mut rng).as_ps() as u128)
            .sum();
        let mean = total as f64 / n as f64;
        let target = SimTime::from_us(16).as_ps() as f64;
        assert!((mean - target).abs() / target < 0.005, "mean {mean}");
    }

    #[test]
    fn unit_draw_clamps_to_one_picosecond() {
        assert_eq!(interframe_from_uniform(SimTime::from_us(16), 1.0), SimTime(1));
    }

    #[test]
    fn seeded_streams_repeat() {
        let spec = &scenario_a_flows()[3];
        let draw = || {
            let mut rng = RngStream::new(42, 3);
            (0..1000)
                .map(|_| sample_interframe(spec, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn flows_get_distinct_streams() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let xs: Vec<f64> = (0..8).map(|_| a.unit_open_closed()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.unit_open_closed()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn fixed_size_is_constant() {
        let spec = &scenario_b_flows()[0];
        let mut rng = RngStream::new(1, 0);
        assert!((0..100).all(|_| sample_frame_size(spec, &mut rng) == 1000));
    }

    #[test]
    fn uniform_size_mean() {
        let spec = &scenario_a_flows()[0];
        let mut rng = RngStream::new(99, 0);
        let n = 1_000_000u64;
        let mut sum = 0u64;
        for _ in 0..n {
            let s = sample_frame_size(spec, &mut rng);
            assert!((64..=1518).contains(&s));
            sum += s as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 791.0).abs() <= 2.0, "mean {mean}");
    }

    #[test]
    fn degenerate_uniform_range() {
        let spec = FlowSpec {
            flow_id: 0,
            mean_interframe: SimTime::from_us(1),
            size: SizeDist::Uniform {
                min_bytes: 64,
                max_bytes: 64,
            },
        };
        let mut rng = RngStream::new(5, 0);
        assert!((0..100).all(|_| sample_frame_size(&spec, &mut rng) == 64));
    }

    #[test]
    fn scenario_a_shape() {
        let flows = scenario_a_flows();
        assert_eq!(flows.len(), 16);
        assert_eq!(flows[0].mean_interframe, SimTime::from_us(16));
        assert!(flows[1..]
            .iter()
            .all(|f| f.mean_interframe == SimTime::from_us(48) && f.size == ETHERNET_RANGE));
        assert!(flows.iter().enumerate().all(|(i, f)| f.flow_id == i));
    }

    #[test]
    fn scenario_b_shape() {
        let flows = scenario_b_flows();
        assert_eq!(flows.len(), 16);
        assert_eq!(
            (flows[0].mean_interframe, flows[0].size),
            (SimTime::from_us(16), SizeDist::Fixed { bytes: 1000 })
        );
        assert_eq!(
            (flows[5].mean_interframe, flows[5].size),
            (SimTime::from_us(32), SizeDist::Fixed { bytes: 500 })
        );
        // bytes per microsecond, cross-multiplied: 1000/16 == 4 * 500/32
        assert_eq!(1000 * 32, 4 * 500 * 16);
    }

    #[test]
    fn validation() {
        let mut spec = scenario_a_flows()[0].clone();
        assert!(spec.validate().is_ok());
        spec.size = SizeDist::Uniform {
            min_bytes: 100,
            max_bytes: 90,
        };
        assert!(matches!(spec.validate(), Err(FlowSpecError::EmptyRange { .. })));
        spec.size = SizeDist::Fixed { bytes: 2000 };
        assert!(matches!(spec.validate(), Err(FlowSpecError::SizeOutOfRange { .. })));
        spec.size = SizeDist::Fixed { bytes: 500 };
        spec.mean_interframe = SimTime::ZERO;
        assert_eq!(spec.validate(), Err(FlowSpecError::ZeroMean(0)));
    }
}

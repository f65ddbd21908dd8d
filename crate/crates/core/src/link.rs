//! Hybrid TDM/WDM link: `W` wavelength channels, each ending at a fixed
//! receiver, shared by `M` tunable transmitters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{SimTime, PS_PER_SEC};

pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1518;
pub const DEFAULT_IFG_BYTES: u32 = 12;
pub const DEFAULT_LINE_RATE_BPS: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("frame size {0} outside [{MIN_FRAME_BYTES}, {MAX_FRAME_BYTES}] bytes")]
    FrameSize(u32),
    #[error("channel {0} does not exist")]
    NoSuchChannel(usize),
    #[error("transmitter {0} does not exist")]
    NoSuchTransmitter(usize),
    #[error("channel {0} is already busy")]
    ChannelBusy(usize),
    #[error("transmitter {0} is already busy")]
    TransmitterBusy(usize),
    #[error("frame for channel {frame_channel} sent on channel {channel}")]
    WrongChannel { frame_channel: usize, channel: usize },
    #[error("transmitter {transmitter} is not transmitting on channel {channel}")]
    NotPaired { transmitter: usize, channel: usize },
    #[error("transmission on channel {channel} starts at {start} before the previous one ended at {prev_end}")]
    Overlap {
        channel: usize,
        start: SimTime,
        prev_end: SimTime,
    },
}

/// An Ethernet frame queued for one destination channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub id: u64,
    pub channel: usize,
    pub size_bytes: u32,
    pub t_created: SimTime,
    pub t_enqueued: SimTime,
    pub t_tx_start: Option<SimTime>,
    pub t_delivered: Option<SimTime>,
}

impl Frame {
    pub fn new(id: u64, channel: usize, size_bytes: u32, created: SimTime) -> Result<Self, LinkError> {
        if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&size_bytes) {
            return Err(LinkError::FrameSize(size_bytes));
        }
        Ok(Frame {
            id,
            channel,
            size_bytes,
            t_created: created,
            t_enqueued: created,
            t_tx_start: None,
            t_delivered: None,
        })
    }

    /// Creation to delivery, once delivered.
    pub fn delay(&self) -> Option<SimTime> {
        self.t_delivered.map(|d| d - self.t_created)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkParams {
    pub channels: usize,
    pub transmitters: usize,
    pub line_rate_bps: u64,
    pub ifg_bytes: u32,
    /// Retuning penalty when a transmitter changes channel. Zero in every
    /// preset.
    pub tuning_time: SimTime,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            channels: 16,
            transmitters: 2,
            line_rate_bps: DEFAULT_LINE_RATE_BPS,
            ifg_bytes: DEFAULT_IFG_BYTES,
            tuning_time: SimTime::ZERO,
        }
    }
}

/// Channel occupancy for `size_bytes` plus the trailing inter-frame gap,
/// rounded half-up to the nearest picosecond.
pub fn transmission_duration(size_bytes: u32, ifg_bytes: u32, line_rate_bps: u64) -> SimTime {
    assert!(line_rate_bps > 0, "line rate must be positive");
    let bits = (size_bytes as u128 + ifg_bytes as u128) * 8;
    let num = bits * PS_PER_SEC as u128;
    let rate = line_rate_bps as u128;
    let ps = (2 * num + rate) / (2 * rate);
    SimTime(u64::try_from(ps).expect("transmission duration overflow"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelState {
    pub channel_id: usize,
    pub line_rate_bps: u64,
    pub busy: bool,
    pub current_transmitter: Option<usize>,
    /// End of the most recent transmission on this channel.
    pub last_end: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransmitterState {
    pub transmitter_id: usize,
    pub busy: bool,
    pub current_channel: Option<usize>,
    pub completion_time: Option<SimTime>,
    pub last_channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkState {
    params: LinkParams,
    channels: Vec<ChannelState>,
    transmitters: Vec<TransmitterState>,
}

impl LinkState {
    pub fn new(params: LinkParams) -> Self {
        assert!(params.channels >= 1 && params.transmitters >= 1);
        let channels = (0..params.channels)
            .map(|channel_id| ChannelState {
                channel_id,
                line_rate_bps: params.line_rate_bps,
                busy: false,
                current_transmitter: None,
                last_end: SimTime::ZERO,
            })
            .collect();
        let transmitters = (0..params.transmitters)
            .map(|transmitter_id| TransmitterState {
                transmitter_id,
                busy: false,
                current_channel: None,
                completion_time: None,
                last_channel: None,
            })
            .collect();
        LinkState {
            params,
            channels,
            transmitters,
        }
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    pub fn channel(&self, id: usize) -> &ChannelState {
        &self.channels[id]
    }

    pub fn transmitter(&self, id: usize) -> &TransmitterState {
        &self.transmitters[id]
    }

    pub fn channels(&self) -> &[ChannelState] {
        &self.channels
    }

    pub fn transmitters(&self) -> &[TransmitterState] {
        &self.transmitters
    }

    /// Lowest-indexed idle transmitter.
    pub fn acquire_transmitter(&self) -> Option<usize> {
        self.transmitters.iter().position(|t| !t.busy)
    }

    pub fn busy_transmitters(&self) -> usize {
        self.transmitters.iter().filter(|t| t.busy).count()
    }

    pub fn frame_duration(&self, size_bytes: u32) -> SimTime {
        transmission_duration(size_bytes, self.params.ifg_bytes, self.params.line_rate_bps)
    }

    /// Pairs `transmitter` with `channel` and returns when the frame (plus
    /// IFG) has cleared the channel.
    pub fn begin_transmission(
        &mut self,
        frame: &mut Frame,
        channel: usize,
        transmitter: usize,
        now: SimTime,
    ) -> Result<SimTime, LinkError> {
        let ch = self
            .channels
            .get(channel)
            .ok_or(LinkError::NoSuchChannel(channel))?;
        let tx = self
            .transmitters
            .get(transmitter)
            .ok_or(LinkError::NoSuchTransmitter(transmitter))?;
        if ch.busy {
            return Err(LinkError::ChannelBusy(channel));
        }
        if tx.busy {
            return Err(LinkError::TransmitterBusy(transmitter));
        }
        if frame.channel != channel {
            return Err(LinkError::WrongChannel {
                frame_channel: frame.channel,
                channel,
            });
        }
        let retune = tx.last_channel.is_some_and(|c| c != channel);
        let start = if retune {
            now + self.params.tuning_time
        } else {
            now
        };
        if start < ch.last_end {
            return Err(LinkError::Overlap {
                channel,
                start,
                prev_end: ch.last_end,
            });
        }
        let completion = start + self.frame_duration(frame.size_bytes);
        frame.t_tx_start = Some(start);

        let ch = &mut self.channels[channel];
        ch.busy = true;
        ch.current_transmitter = Some(transmitter);
        ch.last_end = completion;
        let tx = &mut self.transmitters[transmitter];
        tx.busy = true;
        tx.current_channel = Some(channel);
        tx.completion_time = Some(completion);
        tx.last_channel = Some(channel);
        Ok(completion)
    }

    pub fn end_transmission(
        &mut self,
        transmitter: usize,
        channel: usize,
        _now: SimTime,
    ) -> Result<(), LinkError> {
        let paired = self
            .transmitters
            .get(transmitter)
            .ok_or(LinkError::NoSuchTransmitter(transmitter))?
            .current_channel
            == Some(channel)
            && self
                .channels
                .get(channel)
                .ok_or(LinkError::NoSuchChannel(channel))?
                .current_transmitter
                == Some(transmitter);
        if !paired {
            return Err(LinkError::NotPaired {
                transmitter,
                channel,
            });
        }
        let ch = &mut self.channels[channel];
        ch.busy = false;
        ch.current_transmitter = None;
        let tx = &mut self.transmitters[transmitter];
        tx.busy = false;
        tx.current_channel = None;
        tx.completion_time = None;
        Ok(())
    }

    /// Structural consistency of the busy flags and pairings.
    pub fn check_invariants(&self) -> Result<(), String> {
        let busy_tx = self.busy_transmitters();
        let busy_ch = self.channels.iter().filter(|c| c.busy).count();
        if busy_tx != busy_ch {
            return Err(format!("{busy_tx} busy transmitters but {busy_ch} busy channels"));
        }
        if busy_tx > self.params.transmitters {
            return Err(format!("{busy_tx} busy transmitters exceeds M"));
        }
        for tx in &self.transmitters {
            if tx.busy != tx.current_channel.is_some() || tx.busy != tx.completion_time.is_some() {
                return Err(format!("transmitter {} flags disagree", tx.transmitter_id));
            }
            if let Some(c) = tx.current_channel {
                if self.channels[c].current_transmitter != Some(tx.transmitter_id) {
                    return Err(format!(
                        "transmitter {} points at channel {c} which does not point back",
                        tx.transmitter_id
                    ));
                }
            }
        }
        for ch in &self.channels {
            if ch.busy != ch.current_transmitter.is_some() {
                return Err(format!("channel {} flags disagree", ch.channel_id));
            }
            if let Some(t) = ch.current_transmitter {
                if self.transmitters[t].current_channel != Some(ch.channel_id) {
                    return Err(format!(
                        "channel {} points at transmitter {t} which does not point back",
                        ch.channel_id
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(size: u32, channel: usize) -> Frame {
        Frame::new(1, channel, size, SimTime::ZERO).unwrap()
    }

    #[test]
    fn durations_at_one_gigabit() {
        assert_eq!(transmission_duration(1518, 12, 1_000_000_000), SimTime(12_240_000));
        assert_eq!(transmission_duration(64, 0, 1_000_000_000), SimTime(512_000));
        assert_eq!(transmission_duration(500, 12, 1_000_000_000), SimTime(4_096_000));
    }

    #[test]
    fn durations_round_half_up() {
        // 1 byte at 3 b/s = 8/3 s = 2.666.. s
        assert_eq!(transmission_duration(1, 0, 3), SimTime(2_666_666_666_667));
        // 1 byte at 16e12 b/s = 0.5 ps -> 1 ps
        assert_eq!(transmission_duration(1, 0, 16_000_000_000_000), SimTime(1));
        // 1 byte at 48e12 b/s = 0.1666 ps -> 0 ps
        assert_eq!(transmission_duration(1, 0, 48_000_000_000_000), SimTime(0));
    }

    #[test]
    fn frame_bounds() {
        assert!(Frame::new(0, 0, 63, SimTime::ZERO).is_err());
        assert!(Frame::new(0, 0, 64, SimTime::ZERO).is_ok());
        assert!(Frame::new(0, 0, 1518, SimTime::ZERO).is_ok());
        assert_eq!(
            Frame::new(0, 0, 1519, SimTime::ZERO),
            Err(LinkError::FrameSize(1519))
        );
    }

    #[test]
    fn lowest_idle_transmitter_wins() {
        let mut link = LinkState::new(LinkParams::default());
        assert_eq!(link.acquire_transmitter(), Some(0));
        let mut f = frame(500, 0);
        link.begin_transmission(&mut f, 0, 0, SimTime::ZERO).unwrap();
        assert_eq!(link.acquire_transmitter(), Some(1));
        let mut g = frame(500, 1);
        link.begin_transmission(&mut g, 1, 1, SimTime::ZERO).unwrap();
        assert_eq!(link.acquire_transmitter(), None);
    }

    #[test]
    fn begin_marks_both_busy() {
        let mut link = LinkState::new(LinkParams::default());
        let mut f = frame(500, 3);
        let done = link.begin_transmission(&mut f, 3, 1, SimTime::ZERO).unwrap();
        assert_eq!(done, SimTime(4_096_000));
        assert!(link.channel(3).busy);
        assert!(link.transmitter(1).busy);
        assert_eq!(f.t_tx_start, Some(SimTime::ZERO));
        link.check_invariants().unwrap();
    }

    #[test]
    fn small_frame_completion() {
        // 110 + 12 bytes at 8 ns per byte
        let expected = SimTime((110 + 12) * 8 * 1_000);
        assert_eq!(expected, SimTime(976_000));
        let mut link = LinkState::new(LinkParams::default());
        let now = SimTime::from_us(5);
        let mut f = frame(110, 0);
        let done = link.begin_transmission(&mut f, 0, 0, now).unwrap();
        assert_eq!(done, now + expected);
    }

    #[test]
    fn busy_channel_rejected() {
        let mut link = LinkState::new(LinkParams::default());
        let mut f = frame(500, 3);
        link.begin_transmission(&mut f, 3, 0, SimTime::ZERO).unwrap();
        let mut g = frame(500, 3);
        assert_eq!(
            link.begin_transmission(&mut g, 3, 1, SimTime::ZERO),
            Err(LinkError::ChannelBusy(3))
        );
    }

    #[test]
    fn end_on_idle_transmitter_rejected() {
        let mut link = LinkState::new(LinkParams::default());
        assert_eq!(
            link.end_transmission(0, 0, SimTime::ZERO),
            Err(LinkError::NotPaired {
                transmitter: 0,
                channel: 0
            })
        );
    }

    #[test]
    fn begin_end_cycle_restores_occupancy() {
        let initial = LinkState::new(LinkParams::default());
        let mut link = initial.clone();
        let mut f = frame(500, 3);
        let done = link.begin_transmission(&mut f, 3, 1, SimTime::ZERO).unwrap();
        link.end_transmission(1, 3, done).unwrap();
        for (a, b) in link.channels().iter().zip(initial.channels()) {
            assert_eq!((a.busy, a.current_transmitter), (b.busy, b.current_transmitter));
        }
        for (a, b) in link.transmitters().iter().zip(initial.transmitters()) {
            assert_eq!(
                (a.busy, a.current_channel, a.completion_time),
                (b.busy, b.current_channel, b.completion_time)
            );
        }
    }

    #[test]
    fn mismatched_pairing_rejected() {
        let mut link = LinkState::new(LinkParams::default());
        let mut f = frame(500, 3);
        link.begin_transmission(&mut f, 3, 1, SimTime::ZERO).unwrap();
        assert!(link.end_transmission(0, 3, SimTime::ZERO).is_err());
        assert!(link.end_transmission(1, 2, SimTime::ZERO).is_err());
    }

    #[test]
    fn tuning_delays_start_on_channel_change() {
        let params = LinkParams {
            tuning_time: SimTime::from_ns(100),
            ..LinkParams::default()
        };
        let mut link = LinkState::new(params);
        let mut f = frame(64, 0);
        let done = link.begin_transmission(&mut f, 0, 0, SimTime::ZERO).unwrap();
        link.end_transmission(0, 0, done).unwrap();
        let mut g = frame(64, 1);
        let done2 = link.begin_transmission(&mut g, 1, 0, done).unwrap();
        assert_eq!(g.t_tx_start, Some(done + SimTime::from_ns(100)));
        assert_eq!(done2, done + SimTime::from_ns(100) + link.frame_duration(64));
    }
}

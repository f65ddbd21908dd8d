//! Wires the engine, link, scheduler, traffic and metrics together.

use crate::error::SimError;
use crate::link::{Frame, LinkState};
use crate::metrics::Metrics;
use crate::report::Report;
use crate::scenario::ScenarioConfig;
use crate::sched::{FrameObserver, SchedulerConfig, SchedulerState, Transmission};
use crate::sim::{Engine, EventHandler, EventKind, RunSummary};
use crate::time::SimTime;
use crate::traffic::{FlowGenerator, ScriptedArrival};

#[derive(Debug, Clone)]
enum Source {
    Generators(Vec<FlowGenerator>),
    Script {
        arrivals: Vec<ScriptedArrival>,
        next: usize,
    },
}

/// Delivery tap that also checks per-flow FIFO order.
struct Tap<'a> {
    metrics: &'a mut Metrics,
    last_delivered: &'a mut [Option<u64>],
    reordered: &'a mut u64,
}

impl FrameObserver for Tap<'_> {
    fn frame_dropped(&mut self, frame: &Frame, now: SimTime) {
        self.metrics.frame_dropped(frame, now);
    }

    fn frame_delivered(&mut self, frame: &Frame, now: SimTime) {
        let last = &mut self.last_delivered[frame.channel];
        if last.is_some_and(|id| id >= frame.id) {
            *self.reordered += 1;
        }
        *last = Some(frame.id);
        self.metrics.frame_delivered(frame, now);
    }
}

/// The link, scheduler and traffic that react to engine events.
#[derive(Debug)]
pub struct Model {
    link: LinkState,
    sched: SchedulerState,
    metrics: Metrics,
    source: Source,
    next_frame_id: u64,
    last_delivered: Vec<Option<u64>>,
    reordered: u64,
    verify: bool,
    transmissions: Option<Vec<Transmission>>,
}

impl Model {
    pub fn link(&self) -> &LinkState {
        &self.link
    }

    pub fn scheduler(&self) -> &SchedulerState {
        &self.sched
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn transmissions(&self) -> &[Transmission] {
        self.transmissions.as_deref().unwrap_or(&[])
    }

    fn start(&mut self, engine: &mut Engine, tx: Option<Transmission>) -> Result<(), SimError> {
        if let Some(tx) = tx {
            engine.schedule(
                tx.completion,
                EventKind::TxCompletion {
                    transmitter: tx.transmitter,
                    channel: tx.channel,
                },
            )?;
            if let Some(log) = self.transmissions.as_mut() {
                log.push(tx);
            }
        }
        Ok(())
    }

    fn check(&self, now: SimTime) -> Result<(), SimError> {
        let fail = |what: String| SimError::Invariant { at: now, what };
        self.link.check_invariants().map_err(fail)?;
        self.sched.check_invariants(&self.link).map_err(fail)?;
        if self.reordered > 0 {
            return Err(fail("frames of one flow delivered out of order".into()));
        }
        Ok(())
    }

    /// Invariant checks that hold at any event boundary, including the end.
    pub fn check_invariants(&self, now: SimTime) -> Result<(), SimError> {
        self.check(now)
    }
}

impl EventHandler for Model {
    fn on_flow_arrival(&mut self, engine: &mut Engine, flow: usize) -> Result<(), SimError> {
        let now = engine.now();
        let size = match &mut self.source {
            Source::Generators(gens) => {
                let gen = &mut gens[flow];
                let size = gen.next_size();
                let gap = gen.next_gap();
                engine.schedule(now + gap, EventKind::FlowArrival { flow })?;
                size
            }
            Source::Script { arrivals, next } => {
                let a = arrivals[*next];
                *next += 1;
                if let Some(b) = arrivals.get(*next) {
                    engine.schedule(b.time, EventKind::FlowArrival { flow: b.channel })?;
                }
                a.size_bytes
            }
        };
        let frame = Frame::new(self.next_frame_id, flow, size, now)?;
        self.next_frame_id += 1;
        self.metrics.record_generated(&frame);
        let mut tap = Tap {
            metrics: &mut self.metrics,
            last_delivered: &mut self.last_delivered,
            reordered: &mut self.reordered,
        };
        let tx = self.sched.on_arrival(&mut self.link, frame, now, &mut tap)?;
        self.start(engine, tx)?;
        if self.verify {
            self.check(now)?;
        }
        Ok(())
    }

    fn on_tx_completion(
        &mut self,
        engine: &mut Engine,
        transmitter: usize,
        channel: usize,
    ) -> Result<(), SimError> {
        let now = engine.now();
        let mut tap = Tap {
            metrics: &mut self.metrics,
            last_delivered: &mut self.last_delivered,
            reordered: &mut self.reordered,
        };
        let tx = self
            .sched
            .on_departure(&mut self.link, channel, transmitter, now, &mut tap)?;
        self.start(engine, tx)?;
        if self.verify {
            self.check(now)?;
        }
        Ok(())
    }
}

/// One simulation instance.
#[derive(Debug)]
pub struct Simulation {
    config: ScenarioConfig,
    engine: Engine,
    model: Model,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        let gens = config
            .flows
            .iter()
            .map(|f| FlowGenerator::new(f.clone(), config.master_seed))
            .collect();
        Self::build(config, Source::Generators(gens))
    }

    /// Drives the scheduler with a fixed arrival list instead of random
    /// traffic. Arrivals must be sorted by time; ties keep list order.
    pub fn scripted(config: ScenarioConfig, arrivals: Vec<ScriptedArrival>) -> Result<Self, SimError> {
        assert!(
            arrivals.windows(2).all(|w| w[0].time <= w[1].time),
            "scripted arrivals must be sorted by time"
        );
        Self::build(config, Source::Script { arrivals, next: 0 })
    }

    fn build(config: ScenarioConfig, source: Source) -> Result<Self, SimError> {
        let channels = config.link.channels;
        let mut engine = Engine::new();
        if let Source::Script { arrivals, .. } = &source {
            if let Some(first) = arrivals.first() {
                engine.schedule(first.time, EventKind::FlowArrival { flow: first.channel })?;
            }
        }
        let mut model = Model {
            link: LinkState::new(config.link.clone()),
            sched: SchedulerState::new(&config.scheduler),
            metrics: Metrics::new(channels, config.warmup),
            source,
            next_frame_id: 0,
            last_delivered: vec![None; channels],
            reordered: 0,
            verify: cfg!(debug_assertions),
            transmissions: None,
        };
        if let Source::Generators(gens) = &mut model.source {
            for (flow, gen) in gens.iter_mut().enumerate() {
                let first = gen.next_gap();
                engine.schedule(first, EventKind::FlowArrival { flow })?;
            }
        }
        Ok(Simulation {
            config,
            engine,
            model,
        })
    }

    /// Check every invariant after every event. On by default in debug
    /// builds.
    pub fn verify(mut self, on: bool) -> Self {
        self.model.verify = on;
        self
    }

    pub fn record_decisions(mut self) -> Self {
        self.model.sched.record_decisions();
        self
    }

    pub fn record_transmissions(mut self) -> Self {
        self.model.transmissions.get_or_insert_with(Vec::new);
        self
    }

    pub fn record_trace(mut self) -> Self {
        self.engine.record_trace();
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Runs to `until`; may be called repeatedly with increasing horizons.
    pub fn run_until(&mut self, until: SimTime) -> Result<RunSummary, SimError> {
        self.engine.run(until, &mut self.model)
    }

    /// Runs to the configured duration and fills in end-of-run accounting.
    pub fn run(mut self) -> Result<(Report, Simulation), SimError> {
        let summary = self.run_until(self.config.duration)?;
        self.finish(summary).map(|r| (r, self))
    }

    fn finish(&mut self, summary: RunSummary) -> Result<Report, SimError> {
        let now = self.engine.now();
        for voq in self.model.sched.voqs() {
            let in_flight = (voq.num_pkts_scheduled > 0) as u64;
            let stats = self.model.metrics.flow_mut(voq.channel);
            stats.frames_in_flight = in_flight;
            stats.frames_queued = voq.len() as u64 - in_flight;
        }
        if self.model.verify {
            self.model.check(now)?;
            if !self.model.metrics.is_conserved() {
                return Err(SimError::Invariant {
                    at: now,
                    what: "frame conservation".into(),
                });
            }
            let scheduled = self.engine.scheduled_total();
            let accounted = self.engine.dispatched_total() + self.engine.pending() as u64;
            if scheduled != accounted {
                return Err(SimError::Invariant {
                    at: now,
                    what: format!("{scheduled} events scheduled but {accounted} dispatched or pending"),
                });
            }
        }
        Ok(Report::build(
            &self.config,
            &self.model.metrics,
            summary,
            self.engine.trace_digest(),
            self.model.sched.scan_stats(),
        ))
    }
}

/// Runs a scenario with random traffic to its configured duration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Report, SimError> {
    Simulation::new(config.clone())?.run().map(|(r, _)| r)
}

/// Convenience for the scheduler-only experiments.
pub fn scripted_config(channels: usize, transmitters: usize, scheduler: SchedulerConfig) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::with_flows(Vec::new());
    cfg.link.channels = channels;
    cfg.link.transmitters = transmitters;
    cfg.flows = (0..channels)
        .map(|flow_id| crate::traffic::FlowSpec {
            flow_id,
            mean_interframe: SimTime::from_us(1),
            size: crate::traffic::SizeDist::Fixed { bytes: 64 },
        })
        .collect();
    cfg.scheduler = scheduler;
    cfg.duration = SimTime::MAX;
    cfg
}

//! Discrete-event simulation of request placement over the fog tree.
//!
//! Time advances in whole ticks. Within a tick, slot releases are applied
//! first, then nodes make their decisions from the deepest level upwards so
//! that a forward over a zero-latency link is handled in the same tick.

pub mod presets;

use std::borrow::Borrow;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::iter::Peekable;

use rayon::prelude::*;
use thiserror::Error;

use crate::auction::{threshold_decide, window_capacity, AcceptWindow, BidWindow, Decision, NodeState, PricingRule};
use crate::config::{ConfigError, DecisionPolicy, DeploymentOrder, Diagnostic, LatencyAccounting, SimConfig};
use crate::metrics::{Collector, CompletedRequest, ConcurrencyTrace, MetricsReport, NodeMetrics, SweepPoint, SweepResult};
use crate::topology::{NodeIndex, Tier, Topology, TopologyError};
use crate::workload::{stream_rng_raw, Executable, ExecutableId, Request, RequestId, Stream, Workload, WorkloadError};

pub use presets::{preset, run_preset, PRESETS};

/// Parameters accepted by [`sweep`].
pub const SWEEPABLE: [&str; 3] = ["rate", "num_executables", "stickiness"];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", join_diagnostics(.0))]
    ConfigInvalid(Vec<Diagnostic>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("request {request} targets executable {function}, which not even the cloud stores")]
    FunctionUnknownEverywhere {
        request: RequestId,
        function: ExecutableId,
    },
    #[error("unknown preset {0:?} (known: exp1, exp2, exp3)")]
    UnknownPreset(String),
    #[error("parameter {0:?} cannot be swept (known: rate, num_executables, stickiness)")]
    UnknownParameter(String),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

/// A request travelling between nodes, with the latency gathered so far.
#[derive(Debug, Clone)]
struct InTransit {
    request: Request,
    latency_ms: f64,
    /// Tick at which it reached its current node.
    node_arrival_ms: u64,
}

impl Borrow<Request> for InTransit {
    fn borrow(&self) -> &Request {
        &self.request
    }
}

#[derive(Debug)]
enum EventKind {
    Release {
        node: NodeIndex,
        done: Box<CompletedRequest>,
    },
    Arrival {
        node: NodeIndex,
        item: Box<InTransit>,
    },
    /// Closes a micro-batch window.
    Wake,
}

#[derive(Debug)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug)]
struct NodeRuntime {
    inbox: Vec<InTransit>,
    pending: Vec<InTransit>,
    wake_at: Option<u64>,
    bids: Option<BidWindow>,
    accepts: Option<AcceptWindow>,
    limit: Option<u32>,
    trace: Vec<(u64, u32)>,
    traced_in_flight: u32,
    received: u64,
    offloaded: u64,
}

/// What happened during one processed tick.
#[derive(Debug, Clone, Default)]
pub struct TickOutcome {
    pub time_ms: u64,
    /// Requests whose execution finished at this tick.
    pub finished: Vec<CompletedRequest>,
    pub started: usize,
    pub forwarded: usize,
}

/// A running simulation. Build it with [`Simulation::new`] or
/// [`Simulation::with_workload`], then call [`Simulation::step`] or
/// [`Simulation::run`].
pub struct Simulation {
    cfg: SimConfig,
    topology: Topology,
    nodes: Vec<NodeState>,
    runtime: Vec<NodeRuntime>,
    events: BinaryHeap<Reverse<Event>>,
    incoming: Peekable<std::vec::IntoIter<Request>>,
    total_requests: u64,
    clock: u64,
    last_event: u64,
    seq: u64,
    collector: Collector,
}

impl Simulation {
    /// Validates `cfg`, generates its workload and runs deployment.
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        validate_config(cfg)?;
        let topology = cfg.topology.build()?;
        let workload = Workload::generate(&cfg.workload, &topology, cfg.tick_ms)?;
        Self::deploy(cfg.clone(), topology, workload)
    }

    /// Like [`Simulation::new`] but with a given workload.
    pub fn with_workload(cfg: &SimConfig, workload: Workload) -> Result<Self, SimError> {
        validate_config(cfg)?;
        let topology = cfg.topology.build()?;
        Self::deploy(cfg.clone(), topology, workload)
    }

    fn deploy(cfg: SimConfig, topology: Topology, workload: Workload) -> Result<Self, SimError> {
        let mut nodes: Vec<NodeState> = topology
            .indices()
            .map(|i| {
                let spec = topology.node(i).clone();
                let policy = cfg.auction.node_policy(spec.tier);
                NodeState::new(i, spec, policy)
            })
            .collect();

        let offers = deployment_sequence(&workload.executables, cfg.deployment_order);
        for idx in topology.tier_order() {
            let mut rng = stream_rng_raw(cfg.workload.seed, Stream::Stickiness as u64 + idx.0 as u64);
            for e in &offers {
                nodes[idx.get()].offer_executable(e, 0.0, &mut rng);
            }
        }

        let runtime = nodes
            .iter()
            .map(|n| {
                let (bids, accepts, limit) = match cfg.policy {
                    DecisionPolicy::MovingThreshold { window_ms, .. } if n.tier() != Tier::Cloud => (
                        Some(BidWindow::new(window_ms as f64)),
                        Some(AcceptWindow::new(window_ms as f64)),
                        cfg.auction.per_window_limit.map(|l| l.get(n.tier())),
                    ),
                    _ => (None, None, None),
                };
                NodeRuntime {
                    inbox: Vec::new(),
                    pending: Vec::new(),
                    wake_at: None,
                    bids,
                    accepts,
                    limit,
                    trace: Vec::new(),
                    traced_in_flight: 0,
                    received: 0,
                    offloaded: 0,
                }
            })
            .collect();

        let mut requests = workload.requests;
        requests.sort_by(|a, b| {
            a.arrival_time_ms
                .total_cmp(&b.arrival_time_ms)
                .then(a.id.cmp(&b.id))
        });
        let total_requests = requests.len() as u64;
        let collector = Collector::new(nodes.len());
        Ok(Self {
            cfg,
            topology,
            nodes,
            runtime,
            events: BinaryHeap::new(),
            incoming: requests.into_iter().peekable(),
            total_requests,
            clock: 0,
            last_event: 0,
            seq: 0,
            collector,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn node(&self, idx: NodeIndex) -> &NodeState {
        &self.nodes[idx.get()]
    }

    /// Time of the last processed tick, or of the last idle advance.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// True when no request is waiting, travelling or executing.
    pub fn is_idle(&self) -> bool {
        self.events.is_empty() && self.incoming.len() == 0
    }

    fn tick_of(&self, arrival_ms: f64) -> u64 {
        let tick = self.cfg.tick_ms;
        (arrival_ms.max(0.0) as u64 / tick) * tick
    }

    fn next_time(&mut self) -> Option<u64> {
        let queued = self.events.peek().map(|Reverse(e)| e.time);
        let arriving = self.incoming.peek().map(|r| r.arrival_time_ms);
        let arriving = arriving.map(|a| self.tick_of(a));
        match (queued, arriving) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes every event of the next pending tick. With nothing pending
    /// the clock moves forward by one tick and `None` is returned.
    pub fn step(&mut self) -> Result<Option<TickOutcome>, SimError> {
        match self.next_time() {
            None => {
                self.clock += self.cfg.tick_ms;
                Ok(None)
            }
            Some(t) => self.process_tick(t).map(Some),
        }
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        debug_assert!(time >= self.clock);
        self.seq += 1;
        self.events.push(Reverse(Event {
            time,
            seq: self.seq,
            kind,
        }));
    }

    fn process_tick(&mut self, t: u64) -> Result<TickOutcome, SimError> {
        self.clock = t;
        self.last_event = self.last_event.max(t);
        let mut out = TickOutcome {
            time_ms: t,
            ..TickOutcome::default()
        };

        while self.events.peek().is_some_and(|Reverse(e)| e.time == t) {
            let Reverse(ev) = self.events.pop().expect("peeked");
            match ev.kind {
                EventKind::Release { node, done } => {
                    self.nodes[node.get()].finish_execution();
                    self.collector.record(&done);
                    out.finished.push(*done);
                }
                EventKind::Arrival { node, item } => self.runtime[node.get()].inbox.push(*item),
                EventKind::Wake => {}
            }
        }
        let tick = self.cfg.tick_ms;
        while let Some(r) = self
            .incoming
            .next_if(|r| (r.arrival_time_ms.max(0.0) as u64 / tick) * tick == t)
        {
            let origin = r.origin_node.get();
            self.runtime[origin].inbox.push(InTransit {
                request: r,
                latency_ms: 0.0,
                node_arrival_ms: t,
            });
        }

        let order = self.topology.depth_order().to_vec();
        for idx in order {
            self.decide(idx, t, &mut out)?;
        }

        for (node, rt) in self.nodes.iter().zip(self.runtime.iter_mut()) {
            if node.in_flight() != rt.traced_in_flight {
                rt.traced_in_flight = node.in_flight();
                rt.trace.push((t, node.in_flight()));
            }
        }
        Ok(out)
    }

    fn decide(&mut self, idx: NodeIndex, t: u64, out: &mut TickOutcome) -> Result<(), SimError> {
        let i = idx.get();
        let arrivals = std::mem::take(&mut self.runtime[i].inbox);
        self.runtime[i].received += arrivals.len() as u64;
        if self.nodes[i].tier() == Tier::Cloud {
            return self.auction(idx, t, arrivals, out);
        }
        match self.cfg.policy {
            DecisionPolicy::PerTickBatch => self.auction(idx, t, arrivals, out),
            DecisionPolicy::MicroBatch { window_ms } => {
                let rt = &mut self.runtime[i];
                rt.pending.extend(arrivals);
                if rt.pending.is_empty() {
                    return Ok(());
                }
                if t % window_ms == 0 {
                    rt.wake_at = None;
                    let batch = std::mem::take(&mut rt.pending);
                    self.auction(idx, t, batch, out)
                } else {
                    let close = t.div_ceil(window_ms) * window_ms;
                    if rt.wake_at != Some(close) {
                        rt.wake_at = Some(close);
                        self.schedule(close, EventKind::Wake);
                    }
                    Ok(())
                }
            }
            DecisionPolicy::MovingThreshold { aggregate, .. } => {
                let mut arrivals = arrivals;
                arrivals.sort_by(|a, b| {
                    a.request
                        .arrival_time_ms
                        .total_cmp(&b.request.arrival_time_ms)
                        .then(a.request.id.cmp(&b.request.id))
                });
                let now = t as f64;
                for item in arrivals {
                    let node = &self.nodes[i];
                    let bid = node.bid_for(&item.request);
                    let rt = &mut self.runtime[i];
                    let under_limit = match (rt.limit, rt.accepts.as_mut()) {
                        (Some(limit), Some(acc)) => window_capacity(acc.count(now), limit),
                        _ => true,
                    };
                    let has_capacity = node.has_free_slot() && under_limit;
                    let window = rt.bids.as_mut().expect("threshold nodes track bids");
                    let threshold = window.aggregates(now).map(|a| a.select(aggregate));
                    let decision = threshold_decide(
                        window,
                        now,
                        bid.unwrap_or(item.request.processing_bid),
                        bid.is_some(),
                        has_capacity,
                        aggregate,
                    );
                    match (decision, bid) {
                        (Decision::Execute, Some(bid)) => {
                            let price = match node.policy.pricing_rule {
                                PricingRule::FirstPrice => bid,
                                PricingRule::SecondPrice => threshold.unwrap_or(node.policy.min_base_price).min(bid),
                            };
                            if let Some(acc) = rt.accepts.as_mut() {
                                acc.record(now);
                            }
                            self.start(idx, t, item, price, out);
                        }
                        _ => self.forward(idx, t, item, out)?,
                    }
                }
                Ok(())
            }
        }
    }

    fn auction(&mut self, idx: NodeIndex, t: u64, batch: Vec<InTransit>, out: &mut TickOutcome) -> Result<(), SimError> {
        if batch.is_empty() {
            return Ok(());
        }
        let node = &self.nodes[idx.get()];
        let result = node.run_processing_auction(batch, node.free_slots());
        for (item, price) in result.accepted {
            self.start(idx, t, item, price, out);
        }
        for item in result.offloaded {
            self.forward(idx, t, item, out)?;
        }
        Ok(())
    }

    fn start(&mut self, idx: NodeIndex, t: u64, item: InTransit, price: f64, out: &mut TickOutcome) {
        let tick = self.cfg.tick_ms;
        let node = &mut self.nodes[idx.get()];
        node.start_execution(price);
        let exec = item.request.exec_duration_ms as u64;
        let release = t + exec.div_ceil(tick).max(1) * tick;
        let wait = (t - item.node_arrival_ms) as f64;
        let done = CompletedRequest {
            executed_at: idx,
            executed_tier: node.tier(),
            started_at_ms: t,
            total_latency_ms: item.latency_ms + wait + exec as f64 + self.cfg.client_edge_latency_ms,
            price_paid: price,
            hops_count: item.request.hops.len(),
            request: item.request,
        };
        out.started += 1;
        self.schedule(
            release,
            EventKind::Release {
                node: idx,
                done: Box::new(done),
            },
        );
    }

    fn forward(&mut self, idx: NodeIndex, t: u64, mut item: InTransit, out: &mut TickOutcome) -> Result<(), SimError> {
        let Some(parent) = self.topology.parent(idx) else {
            return Err(SimError::FunctionUnknownEverywhere {
                request: item.request.id,
                function: item.request.function_id,
            });
        };
        let link = self.topology.node(idx).uplink_latency_ms;
        let tick = self.cfg.tick_ms;
        let charged = match self.cfg.latency_accounting {
            LatencyAccounting::RoundTripPerHop => 2.0 * link,
            LatencyAccounting::OneWayPerHop => link,
        };
        item.latency_ms += (t - item.node_arrival_ms) as f64 + charged;
        item.request.hops.push(parent);
        let arrive = t + (link / tick as f64).ceil() as u64 * tick;
        item.node_arrival_ms = arrive;
        self.runtime[idx.get()].offloaded += 1;
        out.forwarded += 1;
        if arrive == t {
            self.runtime[parent.get()].inbox.push(item);
        } else {
            self.schedule(
                arrive,
                EventKind::Arrival {
                    node: parent,
                    item: Box::new(item),
                },
            );
        }
        Ok(())
    }

    /// Runs to completion.
    pub fn run(self) -> Result<MetricsReport, SimError> {
        self.run_with(|_| {})
    }

    /// Runs to completion, handing every finished request to `observer` in
    /// event order.
    pub fn run_with(mut self, mut observer: impl FnMut(&CompletedRequest)) -> Result<MetricsReport, SimError> {
        while !self.is_idle() {
            if let Some(out) = self.step()? {
                out.finished.iter().for_each(&mut observer);
            }
        }
        Ok(self.finish())
    }

    /// Settles storage at the end of the request period and builds the report.
    pub fn finish(mut self) -> MetricsReport {
        let end = self.cfg.workload.duration_ms;
        let horizon = end.max(self.last_event);
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut traces = Vec::with_capacity(self.nodes.len());
        for (i, (node, rt)) in self.nodes.iter_mut().zip(self.runtime.iter_mut()).enumerate() {
            node.settle_storage(end as f64);
            nodes.push(NodeMetrics {
                node: node.spec.id.clone(),
                tier: node.tier(),
                executions: self.collector.executions(i),
                received: rt.received,
                offloaded: rt.offloaded,
                processing_earnings: node.processing_earnings(),
                storage_earnings: node.storage_earnings(),
                storage_residence_s: node.storage_residence_s(),
                stored_count: node.stored_count(),
                stored_count_over_time: vec![(0.0, node.stored_count())],
                mean_concurrency: 0.0,
                max_concurrency: 0,
            });
            traces.push(ConcurrencyTrace {
                node: node.spec.id.clone(),
                points: std::mem::take(&mut rt.trace),
            });
        }
        let histogram = std::mem::take(&mut self.collector).into_histogram();
        MetricsReport::assemble(self.total_requests, horizon, nodes, histogram, traces)
    }
}

/// Executables in the order they are offered during deployment.
pub fn deployment_sequence(executables: &[Executable], order: DeploymentOrder) -> Vec<Executable> {
    let mut v = executables.to_vec();
    match order {
        DeploymentOrder::Generation => {}
        DeploymentOrder::AscendingBid => {
            v.sort_by(|a, b| a.storage_bid.total_cmp(&b.storage_bid).then(a.id.cmp(&b.id)))
        }
        DeploymentOrder::DescendingBid => {
            v.sort_by(|a, b| b.storage_bid.total_cmp(&a.storage_bid).then(a.id.cmp(&b.id)))
        }
    }
    v
}

/// Fails with every diagnostic of `cfg`, if there are any.
pub fn validate_config(cfg: &SimConfig) -> Result<(), SimError> {
    let d = cfg.diagnostics();
    if d.is_empty() {
        Ok(())
    } else {
        Err(SimError::ConfigInvalid(d))
    }
}

/// Generates the workload of `cfg` and simulates it.
pub fn simulate(cfg: &SimConfig) -> Result<MetricsReport, SimError> {
    Simulation::new(cfg)?.run()
}

/// Simulates a given workload, reporting every finished request.
pub fn simulate_workload(
    cfg: &SimConfig,
    workload: Workload,
    observer: impl FnMut(&CompletedRequest),
) -> Result<MetricsReport, SimError> {
    Simulation::with_workload(cfg, workload)?.run_with(observer)
}

/// The config of one sweep point.
pub fn sweep_config(base: &SimConfig, param: &str, value: f64, seed: u64) -> Result<SimConfig, SimError> {
    if !SWEEPABLE.contains(&param) {
        return Err(SimError::UnknownParameter(param.to_string()));
    }
    Ok(base.with_overrides(&[format!("{param}={value}"), format!("seed={seed}")])?)
}

/// Runs every `(value, seed)` combination, in parallel. Points are ordered
/// by value, then seed, as given.
pub fn sweep(base: &SimConfig, param: &str, values: &[f64], seeds: &[u64]) -> Result<SweepResult, SimError> {
    let jobs: Vec<(f64, u64, SimConfig)> = values
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .map(|(v, s)| sweep_config(base, param, v, s).map(|c| (v, s, c)))
        .collect::<Result<_, _>>()?;
    let points = jobs
        .into_par_iter()
        .map(|(value, seed, cfg)| {
            simulate(&cfg).map(|report| SweepPoint { value, seed, report })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        param: param.to_string(),
        points,
    })
}

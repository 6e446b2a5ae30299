//! Seeded generation of executables and request streams.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};
use thiserror::Error;

use crate::topology::{NodeIndex, PerTier, Tier, Topology, TopologyError};

pub type ExecutableId = u32;
pub type RequestId = u64;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid range for {field}: [{lo}, {hi}]")]
    InvalidRange {
        field: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("invalid workload parameter {field}: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
    #[error("no edge nodes to generate requests for")]
    NoEdges,
    #[error("cannot generate requests without executables")]
    NoExecutables,
    #[error("workload record on line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Independent random streams derived from the master seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Executables = 1,
    Arrivals = 2,
    Functions = 3,
    Durations = 4,
    RequestBids = 5,
    /// Per-node stickiness streams start here; node `i` uses `Stickiness + i`.
    Stickiness = 64,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    stream_rng_raw(seed, stream as u64)
}

pub fn stream_rng_raw(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A deployed function with its two bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Executable {
    pub id: ExecutableId,
    pub size: f64,
    /// Base storage bid, currency per second.
    pub storage_bid: f64,
    /// Base processing bid, currency per execution.
    pub processing_bid: f64,
    pub tier_multipliers: PerTier<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidKind {
    Storage,
    Processing,
}

/// Base bid scaled by the multiplier of `tier`.
pub fn effective_bid(e: &Executable, tier: Tier, kind: BidKind) -> f64 {
    let base = match kind {
        BidKind::Storage => e.storage_bid,
        BidKind::Processing => e.processing_bid,
    };
    base * e.tier_multipliers.get(tier)
}

/// One invocation of a function.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub function_id: ExecutableId,
    pub arrival_time_ms: f64,
    pub origin_node: NodeIndex,
    pub exec_duration_ms: u32,
    /// Base processing bid carried by this request. Equals the executable's
    /// bid unless bids are drawn per request.
    pub processing_bid: f64,
    pub hops: SmallVec<[NodeIndex; 4]>,
}

impl Request {
    /// Processing bid as seen by a node of `tier`.
    pub fn effective_bid(&self, e: &Executable, tier: Tier) -> f64 {
        self.processing_bid * e.tier_multipliers.get(tier)
    }
}

fn default_true() -> bool {
    true
}

fn default_multipliers() -> PerTier<f64> {
    PerTier::uniform(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub seed: u64,
    pub num_executables: usize,
    pub size_range: [f64; 2],
    pub storage_bid_range: [f64; 2],
    pub processing_bid_range: [f64; 2],
    /// Draw a fresh processing bid for every request instead of using the
    /// executable's bid.
    #[serde(default)]
    pub per_request_processing_bid: bool,
    /// Requests per second arriving at each edge node.
    pub request_rate: f64,
    pub duration_ms: u64,
    /// Inclusive integer range of execution durations, in milliseconds.
    pub exec_latency_range: [u32; 2],
    #[serde(default = "default_multipliers")]
    pub tier_multipliers: PerTier<f64>,
    /// Spread arrivals uniformly inside their tick. Without jitter all
    /// arrivals of a tick share its start time.
    #[serde(default = "default_true")]
    pub arrival_jitter: bool,
}

impl WorkloadConfig {
    /// Returns `(field, message)` for every violated constraint.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut range = |field: &'static str, [lo, hi]: [f64; 2], positive: bool| {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                out.push((field, format!("expected lo <= hi, got [{lo}, {hi}]")));
            } else if positive && lo <= 0.0 {
                out.push((field, format!("values must be positive, got lo = {lo}")));
            } else if lo < 0.0 {
                out.push((field, format!("values must be non-negative, got lo = {lo}")));
            }
        };
        range("size_range", self.size_range, true);
        range("storage_bid_range", self.storage_bid_range, false);
        range("processing_bid_range", self.processing_bid_range, false);
        let [elo, ehi] = self.exec_latency_range;
        if elo == 0 || elo > ehi {
            out.push((
                "exec_latency_range",
                format!("expected 0 < lo <= hi, got [{elo}, {ehi}]"),
            ));
        }
        if !(self.request_rate.is_finite() && self.request_rate >= 0.0) {
            out.push((
                "request_rate",
                format!("must be a non-negative rate, got {}", self.request_rate),
            ));
        }
        if self.duration_ms == 0 {
            out.push(("duration_ms", "must be positive".into()));
        }
        for tier in Tier::ALL {
            let m = self.tier_multipliers.get(tier);
            if !(m > 0.0 && m <= 1.0) {
                out.push((
                    "tier_multipliers",
                    format!("{tier} multiplier must lie in (0, 1], got {m}"),
                ));
            }
        }
        out
    }

    fn check(&self) -> Result<(), WorkloadError> {
        let Some((field, message)) = self.problems().into_iter().next() else {
            return Ok(());
        };
        let range = match field {
            "size_range" => Some(self.size_range),
            "storage_bid_range" => Some(self.storage_bid_range),
            "processing_bid_range" => Some(self.processing_bid_range),
            "exec_latency_range" => Some(self.exec_latency_range.map(f64::from)),
            _ => None,
        };
        Err(match range {
            Some([lo, hi]) => WorkloadError::InvalidRange { field, lo, hi },
            None => WorkloadError::InvalidParameter { field, message },
        })
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws `num_executables` executables from the configured ranges.
pub fn generate_executables(cfg: &WorkloadConfig) -> Result<Vec<Executable>, WorkloadError> {
    cfg.check()?;
    let mut rng = stream_rng(cfg.seed, Stream::Executables);
    Ok((0..cfg.num_executables)
        .map(|i| {
            let size = uniform(&mut rng, cfg.size_range);
            let storage_bid = uniform(&mut rng, cfg.storage_bid_range);
            let processing_bid = uniform(&mut rng, cfg.processing_bid_range);
            Executable {
                id: i as ExecutableId,
                size,
                storage_bid,
                processing_bid,
                tier_multipliers: cfg.tier_multipliers,
            }
        })
        .collect())
}

/// Generates the request stream of every edge in `edges`, sorted by arrival
/// time with ids assigned in that order.
///
/// Tick `k` of an edge receives `round((k+1)·r) − round(k·r)` requests, with
/// `r` the expected count per tick, so the total per edge is exactly
/// `round(rate × duration)`.
pub fn generate_requests(
    cfg: &WorkloadConfig,
    edges: &[NodeIndex],
    executables: &[Executable],
    tick_ms: u64,
) -> Result<Vec<Request>, WorkloadError> {
    cfg.check()?;
    if edges.is_empty() {
        return Err(WorkloadError::NoEdges);
    }
    if executables.is_empty() {
        return Err(WorkloadError::NoExecutables);
    }
    if tick_ms == 0 {
        return Err(WorkloadError::InvalidParameter {
            field: "tick_ms",
            message: "must be at least 1".into(),
        });
    }
    let mut arrivals = stream_rng(cfg.seed, Stream::Arrivals);
    let mut functions = stream_rng(cfg.seed, Stream::Functions);
    let mut durations = stream_rng(cfg.seed, Stream::Durations);
    let mut bids = stream_rng(cfg.seed, Stream::RequestBids);

    let per_ms = cfg.request_rate / 1000.0;
    let expected = |t_ms: u64| (t_ms as f64 * per_ms).round() as u64;
    let total = expected(cfg.duration_ms) as usize * edges.len();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return Ok(out);
    }

    let [elo, ehi] = cfg.exec_latency_range;
    let mut tick_batch: Vec<(f64, usize, Request)> = Vec::new();
    let mut start = 0u64;
    while start < cfg.duration_ms {
        let end = (start + tick_ms).min(cfg.duration_ms);
        let count = expected(end) - expected(start);
        if count > 0 {
            for (edge_pos, &edge) in edges.iter().enumerate() {
                for _ in 0..count {
                    let jitter = if cfg.arrival_jitter {
                        arrivals.gen::<f64>() * (end - start) as f64
                    } else {
                        0.0
                    };
                    let function_id = functions.gen_range(0..executables.len());
                    let exec_duration_ms = durations.gen_range(elo..=ehi);
                    let processing_bid = if cfg.per_request_processing_bid {
                        uniform(&mut bids, cfg.processing_bid_range)
                    } else {
                        executables[function_id].processing_bid
                    };
                    let arrival = start as f64 + jitter;
                    tick_batch.push((
                        arrival,
                        edge_pos,
                        Request {
                            id: 0,
                            function_id: executables[function_id].id,
                            arrival_time_ms: arrival,
                            origin_node: edge,
                            exec_duration_ms,
                            processing_bid,
                            hops: smallvec![edge],
                        },
                    ));
                }
            }
            tick_batch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, _, mut r) in tick_batch.drain(..) {
                r.id = out.len() as RequestId;
                out.push(r);
            }
        }
        start = end;
    }
    Ok(out)
}

/// Executables plus the request stream that targets them.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub executables: Vec<Executable>,
    pub requests: Vec<Request>,
}

impl Workload {
    pub fn generate(
        cfg: &WorkloadConfig,
        topology: &Topology,
        tick_ms: u64,
    ) -> Result<Self, WorkloadError> {
        let executables = generate_executables(cfg)?;
        let edges = topology.nodes_of(Tier::Edge);
        let requests = if cfg.request_rate == 0.0 || executables.is_empty() {
            cfg.check()?;
            Vec::new()
        } else {
            generate_requests(cfg, &edges, &executables, tick_ms)?
        };
        Ok(Self {
            executables,
            requests,
        })
    }

    /// Writes one JSON record per line: executables first, then requests.
    pub fn dump<W: Write>(&self, topology: &Topology, mut w: W) -> Result<(), WorkloadError> {
        for e in &self.executables {
            let rec = Record::Executable(e.clone());
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        for r in &self.requests {
            let rec = Record::Request(RequestRecord {
                id: r.id,
                function_id: r.function_id,
                arrival_time_ms: r.arrival_time_ms,
                origin_node: topology.node(r.origin_node).id.clone(),
                exec_duration_ms: r.exec_duration_ms,
                processing_bid: r.processing_bid,
            });
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`Workload::dump`]. Requests are re-sorted by
    /// (arrival time, id).
    pub fn load<R: BufRead>(topology: &Topology, r: R) -> Result<Self, WorkloadError> {
        let mut executables = Vec::new();
        let mut requests = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|source| WorkloadError::Parse { line: i + 1, source })?;
            match rec {
                Record::Executable(e) => executables.push(e),
                Record::Request(r) => {
                    let origin = topology.index_of(&r.origin_node)?;
                    requests.push(Request {
                        id: r.id,
                        function_id: r.function_id,
                        arrival_time_ms: r.arrival_time_ms,
                        origin_node: origin,
                        exec_duration_ms: r.exec_duration_ms,
                        processing_bid: r.processing_bid,
                        hops: smallvec![origin],
                    });
                }
            }
        }
        requests.sort_by(|a, b| {
            a.arrival_time_ms
                .total_cmp(&b.arrival_time_ms)
                .then(a.id.cmp(&b.id))
        });
        Ok(Self {
            executables,
            requests,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Executable(Executable),
    Request(RequestRecord),
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRecord {
    id: RequestId,
    function_id: ExecutableId,
    arrival_time_ms: f64,
    origin_node: String,
    exec_duration_ms: u32,
    processing_bid: f64,
}

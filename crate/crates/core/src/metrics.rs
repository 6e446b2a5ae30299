//! Run reports: earnings, placement, latency distribution and concurrency.
//!
//! Percentiles use the nearest-rank method. The concurrency trace holds one
//! point per tick in which a node's in-flight count changed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{PerTier, Tier};
use crate::workload::Request;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed report file {path}: {message}")]
    Malformed { path: String, message: String },
}

/// A request that finished executing somewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedRequest {
    pub request: Request,
    pub executed_at: crate::topology::NodeIndex,
    pub executed_tier: Tier,
    pub started_at_ms: u64,
    pub total_latency_ms: f64,
    pub price_paid: f64,
    pub hops_count: usize,
}

/// Raw per-node counters. Derived averages are computed from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: String,
    pub tier: Tier,
    pub executions: u64,
    pub received: u64,
    pub offloaded: u64,
    pub processing_earnings: f64,
    pub storage_earnings: f64,
    /// Executable-seconds of storage sold.
    pub storage_residence_s: f64,
    pub stored_count: usize,
    pub stored_count_over_time: Vec<(f64, usize)>,
    pub mean_concurrency: f64,
    pub max_concurrency: u32,
}

impl NodeMetrics {
    /// `None` when the node executed nothing.
    pub fn avg_price_per_execution(&self) -> Option<f64> {
        (self.executions > 0).then(|| self.processing_earnings / self.executions as f64)
    }

    /// Average storage bid per executable-second, `None` if nothing stored.
    pub fn avg_storage_price(&self) -> Option<f64> {
        (self.storage_residence_s > 0.0).then(|| self.storage_earnings / self.storage_residence_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub mean: f64,
    /// Distinct latency values and their counts, ascending.
    pub histogram: Vec<(f64, u64)>,
}

impl LatencyStats {
    pub fn from_histogram(histogram: Vec<(f64, u64)>) -> Option<Self> {
        let count: u64 = histogram.iter().map(|&(_, c)| c).sum();
        if count == 0 {
            return None;
        }
        let sum: f64 = histogram.iter().map(|&(v, c)| v * c as f64).sum();
        Some(Self {
            count,
            min: histogram[0].0,
            p25: nearest_rank(&histogram, count, 25.0),
            median: nearest_rank(&histogram, count, 50.0),
            p75: nearest_rank(&histogram, count, 75.0),
            max: histogram[histogram.len() - 1].0,
            mean: sum / count as f64,
            histogram,
        })
    }

    pub fn percentile(&self, p: f64) -> f64 {
        nearest_rank(&self.histogram, self.count, p)
    }

    pub fn cdf(&self) -> Vec<(f64, f64)> {
        cdf_from_histogram(&self.histogram)
    }
}

fn nearest_rank(histogram: &[(f64, u64)], count: u64, p: f64) -> f64 {
    let rank = ((p / 100.0) * count as f64).ceil().clamp(1.0, count as f64) as u64;
    let mut seen = 0;
    for &(v, c) in histogram {
        seen += c;
        if seen >= rank {
            return v;
        }
    }
    histogram[histogram.len() - 1].0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrencyTrace {
    pub node: String,
    /// `(time_ms, in_flight)` after every tick that changed the count.
    pub points: Vec<(u64, u32)>,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total_requests: u64,
    pub horizon_ms: u64,
    pub nodes: Vec<NodeMetrics>,
    pub latency: Option<LatencyStats>,
    pub concurrency_trace: Vec<ConcurrencyTrace>,
    /// Fraction of requests executed per tier. All zero for an empty run.
    pub placement_share: PerTier<f64>,
}

/// Time-average of a step function starting at zero, over `[0, horizon)`.
pub fn mean_of_trace(points: &[(u64, u32)], horizon_ms: u64) -> f64 {
    if horizon_ms == 0 {
        return 0.0;
    }
    let mut area = 0u128;
    let mut last = (0u64, 0u32);
    for &(t, v) in points {
        let t = t.min(horizon_ms);
        area += (t - last.0) as u128 * last.1 as u128;
        last = (t, v);
    }
    area += (horizon_ms - last.0) as u128 * last.1 as u128;
    area as f64 / horizon_ms as f64
}

impl MetricsReport {
    /// Assembles a report; every derived field is computed here so that
    /// re-imported reports compare equal.
    pub fn assemble(
        total_requests: u64,
        horizon_ms: u64,
        mut nodes: Vec<NodeMetrics>,
        histogram: Vec<(f64, u64)>,
        concurrency_trace: Vec<ConcurrencyTrace>,
    ) -> Self {
        for n in &mut nodes {
            if let Some(tr) = concurrency_trace.iter().find(|t| t.node == n.node) {
                n.mean_concurrency = mean_of_trace(&tr.points, horizon_ms);
                n.max_concurrency = tr.points.iter().map(|&(_, v)| v).max().unwrap_or(0);
            }
        }
        let mut placement_share = PerTier::uniform(0.0);
        if total_requests > 0 {
            for tier in Tier::ALL {
                let executed: u64 = nodes
                    .iter()
                    .filter(|n| n.tier == tier)
                    .map(|n| n.executions)
                    .sum();
                placement_share.set(tier, executed as f64 / total_requests as f64);
            }
        }
        Self {
            total_requests,
            horizon_ms,
            nodes,
            latency: LatencyStats::from_histogram(histogram),
            concurrency_trace,
            placement_share,
        }
    }

    pub fn node(&self, id: &str) -> Option<&NodeMetrics> {
        self.nodes.iter().find(|n| n.node == id)
    }

    pub fn nodes_of(&self, tier: Tier) -> impl Iterator<Item = &NodeMetrics> {
        self.nodes.iter().filter(move |n| n.tier == tier)
    }

    /// Sum of a per-node quantity over one tier.
    pub fn tier_sum(&self, tier: Tier, f: impl Fn(&NodeMetrics) -> f64) -> f64 {
        self.nodes_of(tier).map(f).sum()
    }

    /// Average paid price per execution over all nodes of `tier`.
    pub fn tier_avg_price(&self, tier: Tier) -> Option<f64> {
        let executions: u64 = self.nodes_of(tier).map(|n| n.executions).sum();
        (executions > 0)
            .then(|| self.tier_sum(tier, |n| n.processing_earnings) / executions as f64)
    }

    pub fn completed(&self) -> u64 {
        self.nodes.iter().map(|n| n.executions).sum()
    }

    /// Exports the report; returns the written paths.
    pub fn export(&self, dir: &Path, base: &str, format: Format) -> Result<Vec<PathBuf>, MetricsError> {
        std::fs::create_dir_all(dir)?;
        match format {
            Format::Csv => self.export_csv(dir, base),
            Format::Jsonl => {
                let path = dir.join(format!("{base}.jsonl"));
                self.write_jsonl(BufWriter::new(File::create(&path)?))?;
                Ok(vec![path])
            }
        }
    }

    pub fn import(dir: &Path, base: &str, format: Format) -> Result<Self, MetricsError> {
        match format {
            Format::Csv => Self::import_csv(dir, base),
            Format::Jsonl => {
                let path = dir.join(format!("{base}.jsonl"));
                Self::read_jsonl(BufReader::new(File::open(&path)?), &path)
            }
        }
    }

    fn export_csv(&self, dir: &Path, base: &str) -> Result<Vec<PathBuf>, MetricsError> {
        let mut written = Vec::new();

        let path = dir.join(format!("{base}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(NODE_COLUMNS)?;
        for n in &self.nodes {
            w.write_record(node_row(n, self.total_requests, self.horizon_ms))?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{base}_latency.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["latency_ms", "count"])?;
        for (v, c) in self.latency.iter().flat_map(|l| l.histogram.iter()) {
            w.write_record([v.to_string(), c.to_string()])?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{base}_cdf.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["latency_ms", "cumulative_fraction"])?;
        for (v, f) in self.latency.iter().flat_map(|l| l.cdf()) {
            w.write_record([v.to_string(), f.to_string()])?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{base}_storage.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["node", "time_ms", "stored_count"])?;
        for n in &self.nodes {
            for (t, c) in &n.stored_count_over_time {
                w.write_record([n.node.clone(), t.to_string(), c.to_string()])?;
            }
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{base}_concurrency.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["node", "time_ms", "in_flight"])?;
        for tr in &self.concurrency_trace {
            for (t, v) in &tr.points {
                w.write_record([tr.node.clone(), t.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        written.push(path);

        Ok(written)
    }

    fn import_csv(dir: &Path, base: &str) -> Result<Self, MetricsError> {
        let path = dir.join(format!("{base}.csv"));
        let malformed = |p: &Path, m: String| MetricsError::Malformed {
            path: p.display().to_string(),
            message: m,
        };
        let mut r = csv::Reader::from_path(&path)?;
        let mut nodes = Vec::new();
        let mut total_requests = 0;
        let mut horizon_ms = 0;
        for rec in r.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<&str, MetricsError> {
                rec.get(i)
                    .ok_or_else(|| malformed(&path, format!("missing column {}", NODE_COLUMNS[i])))
            };
            let num = |i: usize| -> Result<f64, MetricsError> {
                get(i)?
                    .parse::<f64>()
                    .map_err(|e| malformed(&path, format!("{}: {e}", NODE_COLUMNS[i])))
            };
            let int = |i: usize| -> Result<u64, MetricsError> {
                get(i)?
                    .parse::<u64>()
                    .map_err(|e| malformed(&path, format!("{}: {e}", NODE_COLUMNS[i])))
            };
            let tier: Tier = serde_json::from_value(serde_json::Value::String(get(1)?.into()))?;
            total_requests = int(13)?;
            horizon_ms = int(14)?;
            nodes.push(NodeMetrics {
                node: get(0)?.to_string(),
                tier,
                executions: int(2)?,
                received: int(3)?,
                offloaded: int(4)?,
                processing_earnings: num(5)?,
                storage_earnings: num(6)?,
                storage_residence_s: num(7)?,
                stored_count: int(10)? as usize,
                stored_count_over_time: Vec::new(),
                mean_concurrency: 0.0,
                max_concurrency: 0,
            });
        }

        let path = dir.join(format!("{base}_latency.csv"));
        let mut histogram = Vec::new();
        for rec in csv::Reader::from_path(&path)?.deserialize::<(f64, u64)>() {
            histogram.push(rec?);
        }

        let path = dir.join(format!("{base}_storage.csv"));
        for rec in csv::Reader::from_path(&path)?.deserialize::<(String, f64, usize)>() {
            let (node, t, c) = rec?;
            let n = nodes
                .iter_mut()
                .find(|n| n.node == node)
                .ok_or_else(|| malformed(&path, format!("unknown node {node}")))?;
            n.stored_count_over_time.push((t, c));
        }

        let path = dir.join(format!("{base}_concurrency.csv"));
        let mut traces: Vec<ConcurrencyTrace> = nodes
            .iter()
            .map(|n| ConcurrencyTrace {
                node: n.node.clone(),
                points: Vec::new(),
            })
            .collect();
        for rec in csv::Reader::from_path(&path)?.deserialize::<(String, u64, u32)>() {
            let (node, t, v) = rec?;
            let tr = traces
                .iter_mut()
                .find(|tr| tr.node == node)
                .ok_or_else(|| malformed(&path, format!("unknown node {node}")))?;
            tr.points.push((t, v));
        }

        Ok(Self::assemble(total_requests, horizon_ms, nodes, histogram, traces))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), MetricsError> {
        let line = |w: &mut W, rec: &JsonRecord| -> Result<(), MetricsError> {
            serde_json::to_writer(&mut *w, rec)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(
            &mut w,
            &JsonRecord::Summary {
                total_requests: self.total_requests,
                horizon_ms: self.horizon_ms,
                placement_share: self.placement_share,
            },
        )?;
        for n in &self.nodes {
            line(&mut w, &JsonRecord::Node(n.clone()))?;
        }
        for tr in &self.concurrency_trace {
            line(&mut w, &JsonRecord::Concurrency(tr.clone()))?;
        }
        if let Some(l) = &self.latency {
            line(
                &mut w,
                &JsonRecord::Latency {
                    histogram: l.histogram.clone(),
                },
            )?;
            line(&mut w, &JsonRecord::Cdf { points: l.cdf() })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, origin: &Path) -> Result<Self, MetricsError> {
        let mut summary = None;
        let mut nodes = Vec::new();
        let mut traces = Vec::new();
        let mut histogram = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<JsonRecord>(&line)? {
                JsonRecord::Summary {
                    total_requests,
                    horizon_ms,
                    ..
                } => summary = Some((total_requests, horizon_ms)),
                JsonRecord::Node(n) => nodes.push(n),
                JsonRecord::Concurrency(tr) => traces.push(tr),
                JsonRecord::Latency { histogram: h } => histogram = h,
                JsonRecord::Cdf { .. } => {}
            }
        }
        let (total, horizon) = summary.ok_or_else(|| MetricsError::Malformed {
            path: origin.display().to_string(),
            message: "missing summary record".into(),
        })?;
        Ok(Self::assemble(total, horizon, nodes, histogram, traces))
    }
}

const NODE_COLUMNS: [&str; 15] = [
    "node",
    "tier",
    "executions",
    "received",
    "offloaded",
    "processing_earnings",
    "storage_earnings",
    "storage_residence_s",
    "avg_price_per_execution",
    "avg_storage_price",
    "stored_count",
    "mean_concurrency",
    "max_concurrency",
    "total_requests",
    "horizon_ms",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn node_row(n: &NodeMetrics, total: u64, horizon: u64) -> [String; 15] {
    [
        n.node.clone(),
        n.tier.to_string(),
        n.executions.to_string(),
        n.received.to_string(),
        n.offloaded.to_string(),
        n.processing_earnings.to_string(),
        n.storage_earnings.to_string(),
        n.storage_residence_s.to_string(),
        opt(n.avg_price_per_execution()),
        opt(n.avg_storage_price()),
        n.stored_count.to_string(),
        n.mean_concurrency.to_string(),
        n.max_concurrency.to_string(),
        total.to_string(),
        horizon.to_string(),
    ]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum JsonRecord {
    Summary {
        total_requests: u64,
        horizon_ms: u64,
        placement_share: PerTier<f64>,
    },
    Node(NodeMetrics),
    Concurrency(ConcurrencyTrace),
    Latency {
        histogram: Vec<(f64, u64)>,
    },
    Cdf {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

/// Empirical CDF: each distinct value with the fraction of samples at or
/// below it.
pub fn cdf(latencies: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if latencies.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts: BTreeMap<OrderedFloat<f64>, u64> = BTreeMap::new();
    for &l in latencies {
        *counts.entry(OrderedFloat(l)).or_default() += 1;
    }
    let histogram: Vec<(f64, u64)> = counts.into_iter().map(|(k, c)| (k.0, c)).collect();
    Ok(cdf_from_histogram(&histogram))
}

pub fn cdf_from_histogram(histogram: &[(f64, u64)]) -> Vec<(f64, f64)> {
    let total: u64 = histogram.iter().map(|&(_, c)| c).sum();
    let mut seen = 0;
    histogram
        .iter()
        .map(|&(v, c)| {
            seen += c;
            let fraction = if seen == total {
                1.0
            } else {
                seen as f64 / total as f64
            };
            (v, fraction)
        })
        .collect()
}

/// Number of flat stretches of the CDF: gaps between consecutive support
/// points wider than `min_gap_ms`.
pub fn plateau_gaps(cdf: &[(f64, f64)], min_gap_ms: f64) -> usize {
    cdf.windows(2)
        .filter(|w| w[1].0 - w[0].0 > min_gap_ms)
        .count()
}

/// Streaming accumulator fed by the engine with every completion.
#[derive(Debug, Default)]
pub struct Collector {
    histogram: BTreeMap<OrderedFloat<f64>, u64>,
    executions: Vec<u64>,
}

impl Collector {
    pub fn new(nodes: usize) -> Self {
        Self {
            histogram: BTreeMap::new(),
            executions: vec![0; nodes],
        }
    }

    pub fn record(&mut self, c: &CompletedRequest) {
        *self.histogram.entry(OrderedFloat(c.total_latency_ms)).or_default() += 1;
        self.executions[c.executed_at.get()] += 1;
    }

    pub fn executions(&self, node: usize) -> u64 {
        self.executions[node]
    }

    pub fn into_histogram(self) -> Vec<(f64, u64)> {
        self.histogram.into_iter().map(|(k, c)| (k.0, c)).collect()
    }
}

/// Metrics of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: String,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub report: MetricsReport,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for p in &self.points {
            if !v.contains(&p.value) {
                v.push(p.value);
            }
        }
        v
    }

    pub fn at(&self, value: f64) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.value == value)
    }

    /// Writes one row per (value, seed, node).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec![self.param.as_str(), "seed"];
        header.extend_from_slice(&NODE_COLUMNS);
        w.write_record(&header)?;
        for p in &self.points {
            for n in &p.report.nodes {
                let mut row = vec![p.value.to_string(), p.seed.to_string()];
                row.extend(node_row(n, p.report.total_requests, p.report.horizon_ms));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, tier: Tier, executions: u64, earnings: f64) -> NodeMetrics {
        NodeMetrics {
            node: id.into(),
            tier,
            executions,
            received: executions,
            offloaded: 0,
            processing_earnings: earnings,
            storage_earnings: 100.0 * 120.0,
            storage_residence_s: 120.0,
            stored_count: 1,
            stored_count_over_time: vec![(0.0, 1)],
            mean_concurrency: 0.0,
            max_concurrency: 0,
        }
    }

    fn sample() -> MetricsReport {
        MetricsReport::assemble(
            1,
            30,
            vec![
                node("cloud", Tier::Cloud, 0, 0.0),
                node("edge-0", Tier::Edge, 1, 100.0),
            ],
            vec![(30.0, 1)],
            vec![
                ConcurrencyTrace {
                    node: "cloud".into(),
                    points: vec![],
                },
                ConcurrencyTrace {
                    node: "edge-0".into(),
                    points: vec![(0, 1), (30, 0)],
                },
            ],
        )
    }

    #[test]
    fn single_request_report() {
        let r = sample();
        assert_eq!(r.node("edge-0").unwrap().avg_price_per_execution(), Some(100.0));
        assert_eq!(r.node("cloud").unwrap().avg_price_per_execution(), None);
        assert_eq!(r.node("cloud").unwrap().executions, 0);
        assert_eq!(r.placement_share.edge, 1.0);
        assert_eq!(r.node("edge-0").unwrap().mean_concurrency, 1.0);
        assert_eq!(r.node("edge-0").unwrap().avg_storage_price(), Some(100.0));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(
            cdf(&[10.0, 10.0, 20.0]).unwrap(),
            vec![(10.0, 2.0 / 3.0), (20.0, 1.0)]
        );
        assert_eq!(cdf(&[7.5]).unwrap(), vec![(7.5, 1.0)]);
        assert!(matches!(cdf(&[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn cdf_is_strictly_increasing() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
        let c = cdf(&xs).unwrap();
        assert!(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert_eq!(c.last().unwrap().1, 1.0);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let l = LatencyStats::from_histogram(vec![(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)]).unwrap();
        assert_eq!((l.min, l.p25, l.median, l.p75, l.max), (1.0, 1.0, 2.0, 3.0, 4.0));
        assert_eq!(l.percentile(100.0), 4.0);
        assert_eq!(l.percentile(0.0), 1.0);
        assert_eq!(l.mean, 2.5);
    }

    #[test]
    fn plateaus() {
        let c = cdf(&[27.0, 30.0, 33.0, 67.0, 70.0, 150.0]).unwrap();
        assert_eq!(plateau_gaps(&c, 6.0), 2);
        assert_eq!(plateau_gaps(&c, 100.0), 0);
    }

    #[test]
    fn trace_mean() {
        assert_eq!(mean_of_trace(&[(0, 2), (5, 4), (10, 0)], 20), (10.0 + 20.0) / 20.0);
        assert_eq!(mean_of_trace(&[], 10), 0.0);
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        for f in [Format::Csv, Format::Jsonl] {
            let files = r.export(dir.path(), "run", f).unwrap();
            assert!(!files.is_empty());
            assert_eq!(MetricsReport::import(dir.path(), "run", f).unwrap(), r);
        }
        let cdf_text = std::fs::read_to_string(dir.path().join("run_cdf.csv")).unwrap();
        assert_eq!(cdf_text.lines().last().unwrap(), "30,1");
        assert_eq!(cdf_text.lines().next().unwrap(), "latency_ms,cumulative_fraction");
    }

    #[test]
    fn sweep_rows() {
        let points = [(100.0, 1), (100.0, 2), (200.0, 1), (200.0, 2), (300.0, 1), (300.0, 2)]
            .into_iter()
            .map(|(value, seed)| SweepPoint {
                value,
                seed,
                report: sample(),
            })
            .collect();
        let s = SweepResult {
            param: "rate".into(),
            points,
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // header + values × seeds × nodes
        assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
        assert_eq!(s.values(), vec![100.0, 200.0, 300.0]);
    }
}

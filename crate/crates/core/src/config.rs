//! Simulation configuration, validation and `key=value` overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::auction::{
    EvictionScore, NodePolicy, PricingRule, StorageAccounting, ThresholdAggregate,
};
use crate::topology::{PerTier, Tier, TopologyConfig, TopologyError};
use crate::workload::WorkloadConfig;

/// How a node turns arrivals into execute/offload decisions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionPolicy {
    /// Every tick's arrivals form one auction round.
    #[default]
    PerTickBatch,
    /// Arrivals are held until the next multiple of `window_ms`, then
    /// auctioned together.
    MicroBatch {
        #[serde(default = "micro_batch_window")]
        window_ms: u64,
    },
    /// Each request is compared against an aggregate of the bids seen in the
    /// last `window_ms`.
    MovingThreshold {
        #[serde(default = "threshold_window")]
        window_ms: u64,
        #[serde(default)]
        aggregate: ThresholdAggregate,
    },
}

fn micro_batch_window() -> u64 {
    100
}

fn threshold_window() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyAccounting {
    /// Each offload adds the link latency twice: up and back.
    #[default]
    RoundTripPerHop,
    OneWayPerHop,
}

/// Order in which executables are offered during deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentOrder {
    #[default]
    Generation,
    AscendingBid,
    DescendingBid,
}

fn zero_per_tier() -> PerTier<f64> {
    PerTier::uniform(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionConfig {
    #[serde(default)]
    pub pricing_rule: PricingRule,
    #[serde(default)]
    pub eviction_score: EvictionScore,
    #[serde(default)]
    pub storage_accounting: StorageAccounting,
    #[serde(default = "zero_per_tier")]
    pub stickiness: PerTier<f64>,
    #[serde(default = "zero_per_tier")]
    pub min_base_price: PerTier<f64>,
    /// Requests a node may accept per policy window. Only consulted by the
    /// moving-threshold policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_window_limit: Option<PerTier<u32>>,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            pricing_rule: PricingRule::FirstPrice,
            eviction_score: EvictionScore::Absolute,
            storage_accounting: StorageAccounting::TrueSize,
            stickiness: zero_per_tier(),
            min_base_price: zero_per_tier(),
            per_window_limit: None,
        }
    }
}

impl AuctionConfig {
    pub fn node_policy(&self, tier: Tier) -> NodePolicy {
        NodePolicy {
            pricing_rule: self.pricing_rule,
            eviction_score: self.eviction_score,
            storage_accounting: self.storage_accounting,
            min_base_price: self.min_base_price.get(tier),
            stickiness: self.stickiness.get(tier),
        }
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "one")]
    pub tick_ms: u64,
    #[serde(default)]
    pub latency_accounting: LatencyAccounting,
    /// Added once to every request's total latency.
    #[serde(default)]
    pub client_edge_latency_ms: f64,
    #[serde(default)]
    pub deployment_order: DeploymentOrder,
    #[serde(default)]
    pub policy: DecisionPolicy,
    #[serde(default)]
    pub auction: AuctionConfig,
    pub workload: WorkloadConfig,
    pub topology: TopologyConfig,
}

/// A violated constraint, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("override {0:?} is not of the form key=value")]
    MalformedOverride(String),
    #[error("override {key}: unknown key")]
    UnknownKey { key: String },
    #[error("override {key}: {message}")]
    BadValue { key: String, message: String },
}

impl ConfigError {
    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key } | ConfigError::BadValue { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Every violated invariant, with its field path. Empty means valid.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |path: &str, message: String| {
            out.push(Diagnostic {
                path: path.to_string(),
                message,
            })
        };

        if self.tick_ms == 0 {
            push("tick_ms", "must be at least 1".into());
        }
        if !(self.client_edge_latency_ms.is_finite() && self.client_edge_latency_ms >= 0.0) {
            push(
                "client_edge_latency_ms",
                format!("must be non-negative, got {}", self.client_edge_latency_ms),
            );
        }
        match self.policy {
            DecisionPolicy::PerTickBatch => {}
            DecisionPolicy::MicroBatch { window_ms }
            | DecisionPolicy::MovingThreshold { window_ms, .. } => {
                if window_ms < self.tick_ms.max(1) {
                    push(
                        "policy.window_ms",
                        format!("must be at least tick_ms ({}), got {window_ms}", self.tick_ms),
                    );
                }
            }
        }

        for tier in Tier::ALL {
            let s = self.auction.stickiness.get(tier);
            if !(0.0..=1.0).contains(&s) {
                push(
                    &format!("auction.stickiness.{tier}"),
                    format!("must lie in [0, 1], got {s}"),
                );
            }
            let p = self.auction.min_base_price.get(tier);
            if !(p.is_finite() && p >= 0.0) {
                push(
                    &format!("auction.min_base_price.{tier}"),
                    format!("must be non-negative, got {p}"),
                );
            }
            if let Some(limits) = self.auction.per_window_limit {
                if limits.get(tier) == 0 {
                    push(
                        &format!("auction.per_window_limit.{tier}"),
                        "must be positive".into(),
                    );
                }
            }
        }
        if let StorageAccounting::PerFunctionLimit { limit } = self.auction.storage_accounting {
            if !(limit.is_finite() && limit > 0.0) {
                push(
                    "auction.storage_accounting.limit",
                    format!("must be positive, got {limit}"),
                );
            }
        }

        for (field, message) in self.workload.problems() {
            push(&format!("workload.{field}"), message);
        }

        match self.topology.build() {
            Err(e) => push("topology.nodes", topology_diagnostic(&e)),
            Ok(t) => {
                let cloud = t.node(t.cloud());
                if !cloud.processing_slots.is_unbounded() {
                    push(
                        "topology.nodes",
                        format!("CloudBounded: cloud node {:?} must have unbounded processing_slots", cloud.id),
                    );
                }
                if t.nodes_of(Tier::Edge).is_empty() && self.workload.request_rate > 0.0 {
                    push(
                        "topology.nodes",
                        "NoEdges: requests need at least one edge node".into(),
                    );
                }
            }
        }
        out
    }

    /// Applies `key=value` overrides in order; later writes win.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        for o in overrides {
            cfg = cfg.with_override(o.as_ref())?;
        }
        Ok(cfg)
    }

    pub fn with_override(&self, assignment: &str) -> Result<Self, ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, _)| !k.is_empty())
            .ok_or_else(|| ConfigError::MalformedOverride(assignment.to_string()))?;
        let value = parse_value(raw);
        let mut tree = serde_json::to_value(self).expect("config serializes to JSON");
        let paths: Vec<String> = match key {
            "rate" => vec!["workload.request_rate".into()],
            "seed" => vec!["workload.seed".into()],
            "num_executables" => vec!["workload.num_executables".into()],
            "duration" => vec!["workload.duration_ms".into()],
            "stickiness" => Tier::ALL
                .iter()
                .map(|t| format!("auction.stickiness.{t}"))
                .collect(),
            other => vec![other.to_string()],
        };
        for path in &paths {
            set_path(&mut tree, path, value.clone()).map_err(|()| ConfigError::UnknownKey {
                key: key.to_string(),
            })?;
        }
        serde_json::from_value(tree).map_err(|e| ConfigError::BadValue {
            key: key.to_string(),
            message: e.to_string(),
        })
    }
}

fn topology_diagnostic(e: &TopologyError) -> String {
    let kind = match e {
        TopologyError::Empty => "Empty",
        TopologyError::DuplicateId(_) => "DuplicateId",
        TopologyError::NoCloud => "NoCloud",
        TopologyError::MultipleClouds(_) => "MultipleClouds",
        TopologyError::OrphanNode(_) => "OrphanNode",
        TopologyError::CloudHasParent(_) => "CloudHasParent",
        TopologyError::UnknownParent { .. } => "UnknownParent",
        TopologyError::CycleDetected(_) => "CycleDetected",
        TopologyError::InvalidCapacity { .. } => "InvalidCapacity",
        TopologyError::InvalidLatency(_) => "InvalidLatency",
        TopologyError::UnknownNode(_) => "UnknownNode",
    };
    format!("{kind}: {e}")
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets a dotted path. Intermediate segments must exist; the last segment
/// may create a new object key (unknown keys are caught on deserialize).
fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<(), ()> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, init) = segments.split_last().ok_or(())?;
    let mut cur = tree;
    for seg in init {
        cur = match cur {
            Value::Object(map) => map.get_mut(*seg).ok_or(())?,
            Value::Array(items) => items.get_mut(seg.parse::<usize>().map_err(|_| ())?).ok_or(())?,
            _ => return Err(()),
        };
    }
    match cur {
        Value::Object(map) => {
            map.insert((*last).to_string(), value);
            Ok(())
        }
        Value::Array(items) => {
            let slot = items
                .get_mut(last.parse::<usize>().map_err(|_| ())?)
                .ok_or(())?;
            *slot = value;
            Ok(())
        }
        _ => Err(()),
    }
}

//! Built-in experiment configurations.

use super::{simulate, SimError};
use crate::auction::{EvictionScore, PricingRule, StorageAccounting};
use crate::config::{AuctionConfig, DecisionPolicy, DeploymentOrder, LatencyAccounting, SimConfig};
use crate::metrics::MetricsReport;
use crate::topology::{Capacity, PerTier, TopologyConfig};
use crate::workload::WorkloadConfig;

pub const PRESETS: [&str; 3] = ["exp1", "exp2", "exp3"];

const EDGE_LINK_MS: f64 = 20.0;
const INTERMEDIARY_LINK_MS: f64 = 40.0;

fn workload(num_executables: usize, request_rate: f64) -> WorkloadConfig {
    WorkloadConfig {
        seed: 1,
        num_executables,
        size_range: [0.5, 1.5],
        storage_bid_range: [50.0, 150.0],
        processing_bid_range: [50.0, 150.0],
        per_request_processing_bid: false,
        request_rate,
        duration_ms: 120_000,
        exec_latency_range: [27, 33],
        tier_multipliers: PerTier::uniform(1.0),
        arrival_jitter: true,
    }
}

fn base(workload: WorkloadConfig, topology: TopologyConfig) -> SimConfig {
    SimConfig {
        tick_ms: 1,
        latency_accounting: LatencyAccounting::RoundTripPerHop,
        client_edge_latency_ms: 0.0,
        deployment_order: DeploymentOrder::Generation,
        policy: DecisionPolicy::PerTickBatch,
        auction: AuctionConfig {
            pricing_rule: PricingRule::FirstPrice,
            eviction_score: EvictionScore::Absolute,
            storage_accounting: StorageAccounting::TrueSize,
            stickiness: PerTier::uniform(0.0),
            min_base_price: PerTier::uniform(0.0),
            per_window_limit: None,
        },
        workload,
        topology,
    }
}

/// Processing-bound chain: unbounded storage, 5 edge and 20 intermediary
/// slots, every request carrying its own bid.
fn exp1() -> SimConfig {
    let mut w = workload(100, 100.0);
    w.per_request_processing_bid = true;
    base(
        w,
        TopologyConfig::chain(
            Capacity::Unbounded,
            Capacity::Bounded(5),
            Capacity::Unbounded,
            Capacity::Bounded(20),
            EDGE_LINK_MS,
            INTERMEDIARY_LINK_MS,
        ),
    )
}

/// Storage-bound chain: 10 and 50 storage units, unbounded slots.
fn exp2() -> SimConfig {
    base(
        workload(50, 100.0),
        TopologyConfig::chain(
            Capacity::Bounded(10.0),
            Capacity::Unbounded,
            Capacity::Bounded(50.0),
            Capacity::Unbounded,
            EDGE_LINK_MS,
            INTERMEDIARY_LINK_MS,
        ),
    )
}

/// Three intermediaries with five edges each; executables are offered in
/// ascending storage-bid order.
fn exp3() -> SimConfig {
    let mut cfg = base(
        workload(100, 100.0),
        TopologyConfig::fan_out(
            3,
            5,
            (Capacity::Bounded(10.0), Capacity::Bounded(5), EDGE_LINK_MS),
            (Capacity::Bounded(50.0), Capacity::Bounded(20), INTERMEDIARY_LINK_MS),
        ),
    );
    cfg.deployment_order = DeploymentOrder::AscendingBid;
    cfg
}

pub fn preset(name: &str) -> Result<SimConfig, SimError> {
    match name {
        "exp1" => Ok(exp1()),
        "exp2" => Ok(exp2()),
        "exp3" => Ok(exp3()),
        other => Err(SimError::UnknownPreset(other.to_string())),
    }
}

/// Runs a preset after applying `key=value` overrides.
pub fn run_preset<S: AsRef<str>>(name: &str, overrides: &[S]) -> Result<MetricsReport, SimError> {
    let cfg = preset(name)?.with_overrides(overrides)?;
    simulate(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Tier;

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("exp4"), Err(SimError::UnknownPreset(_))));
    }

    #[test]
    fn shapes() {
        let t = preset("exp3").unwrap().topology.build().unwrap();
        assert_eq!(t.len(), 19);
        assert_eq!(t.nodes_of(Tier::Edge).len(), 15);
        let t = preset("exp1").unwrap().topology.build().unwrap();
        assert_eq!(t.path_ids("edge-0").unwrap(), vec!["edge-0", "intermediary-0", "cloud"]);
    }

    #[test]
    fn exp1_theoretical_ceilings() {
        let cfg = preset("exp1").unwrap();
        let [lo, hi] = cfg.workload.exec_latency_range;
        let mean_exec_s = (lo + hi) as f64 / 2.0 / 1000.0;
        let edge = 5.0 / mean_exec_s;
        let both = 25.0 / mean_exec_s;
        assert!((edge - 166.7).abs() < 1.0, "{edge}");
        assert!((both - 833.3).abs() < 2.0, "{both}");
    }

    #[test]
    fn exp2_small_catalogue_fits_the_edge() {
        let r = run_preset("exp2", &["num_executables=5", "duration=5000"]).unwrap();
        let edge = r.node("edge-0").unwrap();
        assert_eq!(edge.stored_count, 5);
        assert_eq!(edge.offloaded, 0);
    }

    #[test]
    fn exp1_light_load_never_reaches_the_cloud() {
        let r = run_preset("exp1", &["rate=100"]).unwrap();
        assert_eq!(r.node("cloud").unwrap().executions, 0);
        assert_eq!(r.completed(), r.total_requests);
    }
}

//! Per-node allocation mechanisms.
//!
//! A node runs two independent auctions: one over storage bids, deciding
//! which executables it keeps, and one over processing bids, deciding which
//! requests it executes. Online decision helpers and the capacity model live
//! in the submodules.

mod capacity;
mod decision;
mod processing;
mod storage;

pub use capacity::{capacity_estimate, CapacityError};
pub use decision::{
    threshold_decide, window_capacity, AcceptWindow, Aggregates, BidWindow, Decision,
    ThresholdAggregate,
};
pub use processing::BatchOutcome;
pub use storage::StoreDecision;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topology::{Capacity, NodeIndex, NodeSpec, Tier};
use crate::workload::{Executable, ExecutableId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingRule {
    #[default]
    FirstPrice,
    SecondPrice,
}

/// Ordering used to pick eviction victims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionScore {
    /// Effective storage bid.
    #[default]
    Absolute,
    /// Effective storage bid divided by accounted size.
    PerSize,
}

/// How much storage an executable consumes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StorageAccounting {
    /// The executable's own size.
    #[default]
    TrueSize,
    /// A fixed per-function limit, regardless of actual size.
    PerFunctionLimit { limit: f64 },
}

impl StorageAccounting {
    pub fn size_of(&self, e: &Executable) -> f64 {
        match *self {
            StorageAccounting::TrueSize => e.size,
            StorageAccounting::PerFunctionLimit { limit } => limit,
        }
    }
}

/// Strategy knobs of a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePolicy {
    pub pricing_rule: PricingRule,
    pub eviction_score: EvictionScore,
    pub storage_accounting: StorageAccounting,
    /// Executables whose effective storage bid is below this are refused.
    /// Also the second-price fallback when a batch has no losing bid.
    pub min_base_price: f64,
    /// Probability of refusing an offer that would require evictions.
    pub stickiness: f64,
}

impl Default for NodePolicy {
    fn default() -> Self {
        Self {
            pricing_rule: PricingRule::FirstPrice,
            eviction_score: EvictionScore::Absolute,
            storage_accounting: StorageAccounting::TrueSize,
            min_base_price: 0.0,
            stickiness: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredExecutable {
    pub executable: Executable,
    pub accounted_size: f64,
    /// Effective storage bid charged per second.
    pub rate: f64,
    pub since_ms: f64,
}

/// Mutable state of one fog node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub index: NodeIndex,
    pub spec: NodeSpec,
    pub policy: NodePolicy,
    stored: BTreeMap<ExecutableId, StoredExecutable>,
    used_storage: f64,
    in_flight: u32,
    storage_earnings: f64,
    storage_residence_s: f64,
    processing_earnings: f64,
}

impl NodeState {
    pub fn new(index: NodeIndex, spec: NodeSpec, policy: NodePolicy) -> Self {
        Self {
            index,
            spec,
            policy,
            stored: BTreeMap::new(),
            used_storage: 0.0,
            in_flight: 0,
            storage_earnings: 0.0,
            storage_residence_s: 0.0,
            processing_earnings: 0.0,
        }
    }

    pub fn tier(&self) -> Tier {
        self.spec.tier
    }

    pub fn is_stored(&self, id: ExecutableId) -> bool {
        self.stored.contains_key(&id)
    }

    pub fn stored(&self, id: ExecutableId) -> Option<&StoredExecutable> {
        self.stored.get(&id)
    }

    pub fn stored_iter(&self) -> impl Iterator<Item = &StoredExecutable> {
        self.stored.values()
    }

    pub fn stored_count(&self) -> usize {
        self.stored.len()
    }

    pub fn used_storage(&self) -> f64 {
        self.used_storage
    }

    pub fn in_flight(&self) -> u32 {
        self.in_flight
    }

    /// Free processing slots; `None` when the node is unbounded.
    pub fn free_slots(&self) -> Option<usize> {
        match self.spec.processing_slots {
            Capacity::Bounded(n) => Some(n.saturating_sub(self.in_flight) as usize),
            Capacity::Unbounded => None,
        }
    }

    pub fn has_free_slot(&self) -> bool {
        self.free_slots() != Some(0)
    }

    pub fn start_execution(&mut self, price: f64) {
        if let Capacity::Bounded(n) = self.spec.processing_slots {
            assert!(self.in_flight < n, "slot overcommit on {}", self.spec.id);
        }
        self.in_flight += 1;
        self.processing_earnings += price;
    }

    pub fn finish_execution(&mut self) {
        assert!(self.in_flight > 0, "release without execution on {}", self.spec.id);
        self.in_flight -= 1;
    }

    /// Storage earnings settled so far (evicted residents only, until
    /// [`NodeState::settle_storage`] is called).
    pub fn storage_earnings(&self) -> f64 {
        self.storage_earnings
    }

    /// Executable-seconds of storage charged so far.
    pub fn storage_residence_s(&self) -> f64 {
        self.storage_residence_s
    }

    pub fn processing_earnings(&self) -> f64 {
        self.processing_earnings
    }

    /// Charges every resident up to `now_ms` and restarts their meters.
    pub fn settle_storage(&mut self, now_ms: f64) {
        let ids: Vec<ExecutableId> = self.stored.keys().copied().collect();
        for id in ids {
            self.charge(id, now_ms);
        }
    }

    fn charge(&mut self, id: ExecutableId, now_ms: f64) {
        let s = self.stored.get_mut(&id).expect("charged executable is stored");
        let seconds = (now_ms - s.since_ms).max(0.0) / 1000.0;
        self.storage_earnings += s.rate * seconds;
        self.storage_residence_s += seconds;
        s.since_ms = now_ms;
    }

    fn recompute_used(&mut self) {
        self.used_storage = self.stored.values().map(|s| s.accounted_size).sum();
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::topology::PerTier;

    pub fn exec(id: ExecutableId, size: f64, storage_bid: f64, processing_bid: f64) -> Executable {
        Executable {
            id,
            size,
            storage_bid,
            processing_bid,
            tier_multipliers: PerTier::uniform(1.0),
        }
    }

    pub fn node(tier: Tier, storage: Capacity<f64>, slots: Capacity<u32>) -> NodeState {
        NodeState::new(
            NodeIndex(0),
            NodeSpec {
                id: format!("{tier}-test"),
                tier,
                storage_capacity: storage,
                processing_slots: slots,
                parent: (tier != Tier::Cloud).then(|| "cloud".to_string()),
                uplink_latency_ms: 20.0,
            },
            NodePolicy::default(),
        )
    }
}

//! Storage auction: accept, evict or refuse an offered executable.

use rand::Rng;

use super::{EvictionScore, NodeState, StoredExecutable};
use crate::topology::{Capacity, Tier};
use crate::workload::{effective_bid, BidKind, Executable, ExecutableId};

#[derive(Debug, Clone, PartialEq)]
pub struct StoreDecision {
    pub accepted: bool,
    pub evicted: Vec<ExecutableId>,
    /// Effective storage bid charged per second; zero when refused.
    pub charged_rate: f64,
}

impl StoreDecision {
    fn rejected() -> Self {
        Self {
            accepted: false,
            evicted: Vec::new(),
            charged_rate: 0.0,
        }
    }
}

impl NodeState {
    fn score(&self, rate: f64, accounted_size: f64) -> f64 {
        match self.policy.eviction_score {
            EvictionScore::Absolute => rate,
            EvictionScore::PerSize => rate / accounted_size,
        }
    }

    /// Offers `e` to this node at time `now_ms`.
    ///
    /// The cloud accepts anything at or above its base price and never
    /// evicts. A bounded node accepts when the executable fits. Otherwise it
    /// plans evictions in ascending score order on a shadow copy, stopping at
    /// the first resident whose score is not below the newcomer's. A plan
    /// that frees enough room is carried out unless the stickiness coin
    /// (drawn from `rng` only in that case) says to keep the current set.
    pub fn offer_executable<R: Rng + ?Sized>(
        &mut self,
        e: &Executable,
        now_ms: f64,
        rng: &mut R,
    ) -> StoreDecision {
        assert!(
            !self.is_stored(e.id),
            "executable {} offered twice to {}",
            e.id,
            self.spec.id
        );
        let rate = effective_bid(e, self.tier(), BidKind::Storage);
        if rate < self.policy.min_base_price {
            return StoreDecision::rejected();
        }
        let size = self.policy.storage_accounting.size_of(e);

        let capacity = match (self.tier(), self.spec.storage_capacity) {
            (Tier::Cloud, _) | (_, Capacity::Unbounded) => None,
            (_, Capacity::Bounded(c)) => Some(c),
        };
        let Some(capacity) = capacity else {
            self.insert(e, size, rate, now_ms);
            return self.accepted(rate, Vec::new());
        };

        if self.used_storage + size <= capacity {
            self.insert(e, size, rate, now_ms);
            return self.accepted(rate, Vec::new());
        }

        let Some(victims) = self.eviction_plan(size, self.score(rate, size), capacity) else {
            return StoreDecision::rejected();
        };
        if rng.gen::<f64>() < self.policy.stickiness {
            return StoreDecision::rejected();
        }
        for id in &victims {
            self.charge(*id, now_ms);
            self.stored.remove(id);
        }
        self.insert(e, size, rate, now_ms);
        debug_assert!(self.used_storage <= capacity);
        self.accepted(rate, victims)
    }

    /// Victims whose removal makes room for `size`, or `None` if the
    /// newcomer cannot outbid enough residents.
    fn eviction_plan(&self, size: f64, score: f64, capacity: f64) -> Option<Vec<ExecutableId>> {
        let mut candidates: Vec<(f64, ExecutableId)> = self
            .stored
            .values()
            .map(|s| (self.score(s.rate, s.accounted_size), s.executable.id))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut victims = Vec::new();
        for (cand_score, id) in candidates {
            if cand_score >= score {
                return None;
            }
            victims.push(id);
            // Summed in id order, exactly as `recompute_used` will after removal.
            let remaining: f64 = self
                .stored
                .values()
                .filter(|s| !victims.contains(&s.executable.id))
                .map(|s| s.accounted_size)
                .sum();
            if remaining + size <= capacity {
                return Some(victims);
            }
        }
        None
    }

    fn insert(&mut self, e: &Executable, accounted_size: f64, rate: f64, now_ms: f64) {
        self.stored.insert(
            e.id,
            StoredExecutable {
                executable: e.clone(),
                accounted_size,
                rate,
                since_ms: now_ms,
            },
        );
        self.recompute_used();
    }

    fn accepted(&self, rate: f64, evicted: Vec<ExecutableId>) -> StoreDecision {
        StoreDecision {
            accepted: true,
            evicted,
            charged_rate: rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::{exec, node};
    use super::super::{EvictionScore, StorageAccounting};
    use super::*;
    use crate::workload::stream_rng_raw;
    use proptest::prelude::*;

    fn full_edge() -> NodeState {
        let mut n = node(Tier::Edge, Capacity::Bounded(10.0), Capacity::Bounded(5));
        let mut rng = stream_rng_raw(1, 0);
        for i in 0..10 {
            let d = n.offer_executable(&exec(i, 1.0, 50.0 + 10.0 * i as f64, 100.0), 0.0, &mut rng);
            assert!(d.accepted && d.evicted.is_empty());
        }
        n
    }

    #[test]
    fn free_space_accepts() {
        let mut n = node(Tier::Edge, Capacity::Bounded(10.0), Capacity::Bounded(5));
        let d = n.offer_executable(&exec(0, 1.0, 80.0, 100.0), 0.0, &mut stream_rng_raw(0, 0));
        assert_eq!(
            d,
            StoreDecision {
                accepted: true,
                evicted: vec![],
                charged_rate: 80.0
            }
        );
        assert_eq!(n.used_storage(), 1.0);
    }

    #[test]
    fn full_node_evicts_lowest_bid() {
        let mut n = full_edge();
        let d = n.offer_executable(&exec(99, 1.0, 150.0, 100.0), 0.0, &mut stream_rng_raw(0, 0));
        assert!(d.accepted);
        assert_eq!(d.evicted, vec![0]);
        assert!(!n.is_stored(0) && n.is_stored(99));
        assert_eq!(n.used_storage(), 10.0);
    }

    #[test]
    fn sticky_node_refuses() {
        let mut n = full_edge();
        n.policy.stickiness = 1.0;
        let d = n.offer_executable(&exec(99, 1.0, 150.0, 100.0), 0.0, &mut stream_rng_raw(0, 0));
        assert_eq!(d, StoreDecision::rejected());
        assert_eq!(n.stored_count(), 10);
        assert!(n.is_stored(0));
    }

    #[test]
    fn low_bid_cannot_evict() {
        let mut n = full_edge();
        let d = n.offer_executable(&exec(99, 1.0, 50.0, 100.0), 0.0, &mut stream_rng_raw(0, 0));
        assert!(!d.accepted);
        assert_eq!(n.stored_count(), 10);
    }

    #[test]
    fn failed_plan_evicts_nothing() {
        // Needs three victims but only two residents are cheaper than the offer.
        let mut n = node(Tier::Edge, Capacity::Bounded(3.0), Capacity::Bounded(1));
        let mut rng = stream_rng_raw(0, 0);
        for (i, bid) in [10.0, 20.0, 200.0].into_iter().enumerate() {
            assert!(n.offer_executable(&exec(i as u32, 1.0, bid, 1.0), 0.0, &mut rng).accepted);
        }
        let d = n.offer_executable(&exec(9, 3.0, 100.0, 1.0), 0.0, &mut rng);
        assert!(!d.accepted && d.evicted.is_empty());
        assert_eq!(n.stored_count(), 3);
        assert_eq!(n.used_storage(), 3.0);
    }

    #[test]
    fn oversized_offer_rejected() {
        let mut n = node(Tier::Edge, Capacity::Bounded(1.0), Capacity::Bounded(1));
        let d = n.offer_executable(&exec(0, 2.0, 1000.0, 1.0), 0.0, &mut stream_rng_raw(0, 0));
        assert!(!d.accepted);
    }

    #[test]
    fn per_size_score_prefers_dense_bids() {
        let mut n = node(Tier::Edge, Capacity::Bounded(2.0), Capacity::Bounded(1));
        n.policy.eviction_score = EvictionScore::PerSize;
        let mut rng = stream_rng_raw(0, 0);
        // 60 over size 2: 30 per unit.
        assert!(n.offer_executable(&exec(0, 2.0, 60.0, 1.0), 0.0, &mut rng).accepted);
        // 40 over size 1 beats 30 per unit even though the absolute bid is lower.
        let d = n.offer_executable(&exec(1, 1.0, 40.0, 1.0), 0.0, &mut rng);
        assert!(d.accepted);
        assert_eq!(d.evicted, vec![0]);

        let mut abs = node(Tier::Edge, Capacity::Bounded(2.0), Capacity::Bounded(1));
        assert!(abs.offer_executable(&exec(0, 2.0, 60.0, 1.0), 0.0, &mut rng).accepted);
        assert!(!abs.offer_executable(&exec(1, 1.0, 40.0, 1.0), 0.0, &mut rng).accepted);
    }

    #[test]
    fn cloud_accepts_above_floor_only() {
        let mut c = node(Tier::Cloud, Capacity::Unbounded, Capacity::Unbounded);
        c.policy.min_base_price = 60.0;
        let mut rng = stream_rng_raw(0, 0);
        assert!(!c.offer_executable(&exec(0, 1.0, 59.9, 1.0), 0.0, &mut rng).accepted);
        assert!(c.offer_executable(&exec(1, 1.0, 60.0, 1.0), 0.0, &mut rng).accepted);
        for i in 2..1000 {
            assert!(c.offer_executable(&exec(i, 1.5, 100.0, 1.0), 0.0, &mut rng).accepted);
        }
        assert_eq!(c.stored_count(), 999);
    }

    #[test]
    fn proxy_accounting_counts_slots() {
        let mut n = node(Tier::Edge, Capacity::Bounded(96.0), Capacity::Bounded(1));
        n.policy.storage_accounting = StorageAccounting::PerFunctionLimit { limit: 48.0 };
        let mut rng = stream_rng_raw(0, 0);
        assert!(n.offer_executable(&exec(0, 0.001, 70.0, 1.0), 0.0, &mut rng).accepted);
        assert!(n.offer_executable(&exec(1, 0.001, 80.0, 1.0), 0.0, &mut rng).accepted);
        let d = n.offer_executable(&exec(2, 0.001, 90.0, 1.0), 0.0, &mut rng);
        assert_eq!(d.evicted, vec![0]);
        assert_eq!(n.used_storage(), 96.0);
    }

    #[test]
    fn earnings_follow_residence() {
        let mut n = node(Tier::Edge, Capacity::Bounded(1.0), Capacity::Bounded(1));
        let mut rng = stream_rng_raw(0, 0);
        n.offer_executable(&exec(0, 1.0, 50.0, 1.0), 0.0, &mut rng);
        n.offer_executable(&exec(1, 1.0, 100.0, 1.0), 2000.0, &mut rng);
        n.settle_storage(5000.0);
        assert_eq!(n.storage_earnings(), 50.0 * 2.0 + 100.0 * 3.0);
    }

    #[test]
    fn ascending_offers_with_full_stickiness_keep_first_ten() {
        let mut n = node(Tier::Edge, Capacity::Bounded(10.0), Capacity::Bounded(1));
        n.policy.stickiness = 1.0;
        let mut rng = stream_rng_raw(0, 0);
        for i in 0..100 {
            n.offer_executable(&exec(i, 1.0, 50.0 + i as f64, 1.0), 0.0, &mut rng);
        }
        let ids: Vec<u32> = n.stored_iter().map(|s| s.executable.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());

        n.policy.stickiness = 0.0;
        let mut m = node(Tier::Edge, Capacity::Bounded(10.0), Capacity::Bounded(1));
        for i in 0..100 {
            m.offer_executable(&exec(i, 1.0, 50.0 + i as f64, 1.0), 0.0, &mut rng);
        }
        let ids: Vec<u32> = m.stored_iter().map(|s| s.executable.id).collect();
        assert_eq!(ids, (90..100).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn capacity_never_exceeded(
            offers in prop::collection::vec((0.1f64..3.0, 0.0f64..200.0), 1..60),
            capacity in 1.0f64..12.0,
            stickiness in 0.0f64..=1.0,
            per_size in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut n = node(Tier::Edge, Capacity::Bounded(capacity), Capacity::Bounded(1));
            n.policy.stickiness = stickiness;
            if per_size {
                n.policy.eviction_score = EvictionScore::PerSize;
            }
            let mut rng = stream_rng_raw(seed, 0);
            for (i, (size, bid)) in offers.into_iter().enumerate() {
                let before: Vec<u32> = n.stored_iter().map(|s| s.executable.id).collect();
                let d = n.offer_executable(&exec(i as u32, size, bid, 1.0), 0.0, &mut rng);
                prop_assert!(n.used_storage() <= capacity);
                let sum: f64 = n.stored_iter().map(|s| s.accounted_size).sum();
                prop_assert_eq!(sum, n.used_storage());
                if !d.accepted {
                    let after: Vec<u32> = n.stored_iter().map(|s| s.executable.id).collect();
                    prop_assert_eq!(before, after);
                    prop_assert!(d.evicted.is_empty());
                } else {
                    prop_assert!(n.is_stored(i as u32));
                    for v in &d.evicted {
                        prop_assert!(!n.is_stored(*v));
                    }
                }
            }
        }
    }
}

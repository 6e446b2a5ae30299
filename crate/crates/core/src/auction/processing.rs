//! Processing auction over a batch of requests.

use std::borrow::Borrow;
use std::cmp::Ordering;

use super::{NodeState, PricingRule};
use crate::workload::Request;

/// Result of one auction round. Every input request ends up in exactly one
/// of the two lists.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome<T> {
    /// Winners in rank order, with the price each one pays.
    pub accepted: Vec<(T, f64)>,
    /// Requests for executables not stored here (input order), followed by
    /// the losers of the auction (rank order).
    pub offloaded: Vec<T>,
}

/// Rank order: higher bid first, then earlier arrival, then lower id.
pub(crate) fn rank(a: (f64, &Request), b: (f64, &Request)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.arrival_time_ms.total_cmp(&b.1.arrival_time_ms))
        .then(a.1.id.cmp(&b.1.id))
}

impl NodeState {
    /// Effective processing bid of `r` at this node, if the executable is stored.
    pub fn bid_for(&self, r: &Request) -> Option<f64> {
        self.stored(r.function_id)
            .map(|s| r.effective_bid(&s.executable, self.tier()))
    }

    /// Runs one auction round over `batch` with `free_slots` available
    /// (`None` for an unbounded node).
    ///
    /// Requests without a local executable are offloaded. The rest are
    /// ranked by effective bid and the first `free_slots` win. Under the
    /// second-price rule every winner pays the best losing bid of the round
    /// (or the node's base price when nobody lost), never more than its own
    /// bid.
    pub fn run_processing_auction<T: Borrow<Request>>(
        &self,
        batch: Vec<T>,
        free_slots: Option<usize>,
    ) -> BatchOutcome<T> {
        let mut offloaded = Vec::new();
        let mut bidders = Vec::with_capacity(batch.len());
        for item in batch {
            match self.bid_for(item.borrow()) {
                Some(bid) => bidders.push((bid, item)),
                None => offloaded.push(item),
            }
        }
        bidders.sort_by(|a, b| rank((a.0, a.1.borrow()), (b.0, b.1.borrow())));

        let winners = free_slots.map_or(bidders.len(), |n| n.min(bidders.len()));
        let losers = bidders.split_off(winners);
        let clearing = match self.policy.pricing_rule {
            PricingRule::FirstPrice => None,
            PricingRule::SecondPrice => Some(
                losers
                    .first()
                    .map_or(self.policy.min_base_price, |(bid, _)| *bid),
            ),
        };
        let accepted = bidders
            .into_iter()
            .map(|(bid, item)| (item, clearing.map_or(bid, |c| c.min(bid))))
            .collect();
        offloaded.extend(losers.into_iter().map(|(_, item)| item));
        BatchOutcome {
            accepted,
            offloaded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::{exec, node};
    use super::*;
    use crate::topology::{Capacity, NodeIndex, Tier};
    use crate::workload::stream_rng_raw;
    use proptest::prelude::*;
    use smallvec::smallvec;

    fn req(id: u64, function: u32, bid: f64, arrival: f64) -> Request {
        Request {
            id,
            function_id: function,
            arrival_time_ms: arrival,
            origin_node: NodeIndex(0),
            exec_duration_ms: 30,
            processing_bid: bid,
            hops: smallvec![NodeIndex(0)],
        }
    }

    fn stocked(functions: u32) -> NodeState {
        let mut n = node(Tier::Edge, Capacity::Unbounded, Capacity::Bounded(5));
        let mut rng = stream_rng_raw(0, 0);
        for f in 0..functions {
            n.offer_executable(&exec(f, 1.0, 100.0, 100.0), 0.0, &mut rng);
        }
        n
    }

    /// Brute-force: maximum accepted-bid sum over all subsets of size k.
    fn best_subset_sum(bids: &[f64], k: usize) -> f64 {
        let n = bids.len();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| bids[i]).sum();
                best = best.max(s);
            }
        }
        best
    }

    #[test]
    fn top_five_of_seven() {
        let n = stocked(7);
        let bids = [150.0, 140.0, 130.0, 120.0, 110.0, 100.0, 90.0];
        let batch: Vec<Request> = bids
            .iter()
            .enumerate()
            .map(|(i, &b)| req(i as u64, i as u32, b, 0.0))
            .collect();
        let out = n.run_processing_auction(batch, Some(5));
        let won: Vec<f64> = out.accepted.iter().map(|(_, p)| *p).collect();
        assert_eq!(won, vec![150.0, 140.0, 130.0, 120.0, 110.0]);
        let lost: Vec<f64> = out.offloaded.iter().map(|r| r.processing_bid).collect();
        assert_eq!(lost, vec![100.0, 90.0]);
        assert_eq!(won.iter().sum::<f64>(), best_subset_sum(&bids, 5));
    }

    #[test]
    fn unstored_functions_are_offloaded() {
        let n = stocked(2);
        let batch = vec![req(0, 5, 150.0, 0.0), req(1, 6, 140.0, 0.0)];
        let out = n.run_processing_auction(batch, Some(5));
        assert!(out.accepted.is_empty());
        assert_eq!(out.offloaded.len(), 2);
    }

    #[test]
    fn no_slots_offloads_everything() {
        let n = stocked(3);
        let batch = vec![req(0, 0, 150.0, 0.0), req(1, 1, 140.0, 0.0)];
        let out = n.run_processing_auction(batch, Some(0));
        assert!(out.accepted.is_empty());
        assert_eq!(out.offloaded.len(), 2);
    }

    #[test]
    fn second_price_charges_best_loser() {
        let mut n = stocked(3);
        n.policy.pricing_rule = PricingRule::SecondPrice;
        let batch = vec![
            req(0, 0, 150.0, 0.0),
            req(1, 1, 140.0, 0.0),
            req(2, 2, 120.0, 0.0),
        ];
        let out = n.run_processing_auction(batch, Some(2));
        let prices: Vec<f64> = out.accepted.iter().map(|(_, p)| *p).collect();
        assert_eq!(prices, vec![120.0, 120.0]);
    }

    #[test]
    fn second_price_fallback_is_base_price() {
        let mut n = stocked(2);
        n.policy.pricing_rule = PricingRule::SecondPrice;
        n.policy.min_base_price = 60.0;
        let batch = vec![req(0, 0, 150.0, 0.0), req(1, 1, 55.0, 0.0)];
        let out = n.run_processing_auction(batch, Some(4));
        let prices: Vec<f64> = out.accepted.iter().map(|(_, p)| *p).collect();
        // Capped at the bidder's own bid.
        assert_eq!(prices, vec![60.0, 55.0]);
    }

    #[test]
    fn ties_prefer_earlier_then_lower_id() {
        let n = stocked(3);
        let batch = vec![
            req(7, 0, 100.0, 0.5),
            req(3, 1, 100.0, 0.5),
            req(1, 2, 100.0, 0.9),
        ];
        let out = n.run_processing_auction(batch, Some(1));
        assert_eq!(out.accepted[0].0.id, 3);
        let out = n.run_processing_auction(
            vec![req(1, 2, 100.0, 0.9), req(7, 0, 100.0, 0.5)],
            Some(1),
        );
        assert_eq!(out.accepted[0].0.id, 7);
    }

    #[test]
    fn cloud_takes_everything_stored() {
        let mut c = node(Tier::Cloud, Capacity::Unbounded, Capacity::Unbounded);
        let mut rng = stream_rng_raw(0, 0);
        for f in 0..10 {
            c.offer_executable(&exec(f, 1.0, 1.0, 1.0), 0.0, &mut rng);
        }
        let batch: Vec<Request> = (0..500).map(|i| req(i, (i % 10) as u32, 80.0, 0.0)).collect();
        let out = c.run_processing_auction(batch, c.free_slots());
        assert_eq!(out.accepted.len(), 500);
        assert!(out.offloaded.is_empty());
    }

    #[test]
    fn discount_applies_at_tier() {
        let mut n = node(Tier::Intermediary, Capacity::Unbounded, Capacity::Bounded(2));
        let mut e = exec(0, 1.0, 100.0, 100.0);
        e.tier_multipliers.intermediary = 0.9;
        n.offer_executable(&e, 0.0, &mut stream_rng_raw(0, 0));
        let out = n.run_processing_auction(vec![req(0, 0, 100.0, 0.0)], Some(1));
        assert_eq!(out.accepted[0].1, 90.0);
    }

    proptest! {
        #[test]
        fn accepted_sum_is_optimal(
            bids in prop::collection::vec(prop::sample::select(vec![50.0, 75.0, 100.0, 125.0, 150.0]), 0..10),
            stored_mask in any::<u16>(),
            slots in 0usize..10,
            second in any::<bool>(),
        ) {
            let mut n = node(Tier::Edge, Capacity::Unbounded, Capacity::Bounded(12));
            if second {
                n.policy.pricing_rule = PricingRule::SecondPrice;
            }
            let mut rng = stream_rng_raw(0, 0);
            for f in 0..bids.len() as u32 {
                if stored_mask & (1 << f) != 0 {
                    n.offer_executable(&exec(f, 1.0, 1.0, 1.0), 0.0, &mut rng);
                }
            }
            let batch: Vec<Request> = bids
                .iter()
                .enumerate()
                .map(|(i, &b)| req(i as u64, i as u32, b, 0.0))
                .collect();
            let eligible: Vec<f64> = batch
                .iter()
                .filter(|r| n.is_stored(r.function_id))
                .map(|r| r.processing_bid)
                .collect();
            let out = n.run_processing_auction(batch, Some(slots));
            prop_assert_eq!(out.accepted.len() + out.offloaded.len(), bids.len());
            let k = slots.min(eligible.len());
            prop_assert_eq!(out.accepted.len(), k);
            let sum: f64 = out.accepted.iter().map(|(r, _)| r.processing_bid).sum();
            prop_assert_eq!(sum, best_subset_sum(&eligible, k));
            for (r, price) in &out.accepted {
                prop_assert!(*price <= r.processing_bid);
            }
            let mut ids: Vec<u64> = out
                .accepted
                .iter()
                .map(|(r, _)| r.id)
                .chain(out.offloaded.iter().map(|r| r.id))
                .collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..bids.len() as u64).collect::<Vec<_>>());
        }
    }
}

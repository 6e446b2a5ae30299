//! Online execute-or-offload decisions for requests that arrive one by one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Execute,
    Offload,
}

/// Aggregate of the bid window used as the acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdAggregate {
    #[default]
    Avg,
    Median,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub avg: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Aggregates {
    pub fn select(&self, which: ThresholdAggregate) -> f64 {
        match which {
            ThresholdAggregate::Avg => self.avg,
            ThresholdAggregate::Median => self.median,
            ThresholdAggregate::Min => self.min,
            ThresholdAggregate::Max => self.max,
        }
    }
}

/// Time-stamped bids seen during the last `window_ms` milliseconds.
///
/// A sample taken at `t` belongs to the window at `now` iff
/// `now - window_ms < t <= now`.
#[derive(Debug, Clone)]
pub struct BidWindow {
    window_ms: f64,
    samples: VecDeque<(f64, f64)>,
}

impl BidWindow {
    pub fn new(window_ms: f64) -> Self {
        Self {
            window_ms,
            samples: VecDeque::new(),
        }
    }

    pub fn window_ms(&self) -> f64 {
        self.window_ms
    }

    /// Records a bid observed at `now_ms`. Samples must arrive in time order.
    pub fn observe(&mut self, now_ms: f64, bid: f64) {
        debug_assert!(self.samples.back().is_none_or(|&(t, _)| t <= now_ms));
        self.samples.push_back((now_ms, bid));
    }

    fn expire(&mut self, now_ms: f64) {
        while let Some(&(t, _)) = self.samples.front() {
            if t <= now_ms - self.window_ms {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    /// Aggregates over the samples inside the window at `now_ms`, or `None`
    /// if it is empty.
    pub fn aggregates(&mut self, now_ms: f64) -> Option<Aggregates> {
        self.expire(now_ms);
        if self.samples.is_empty() {
            return None;
        }
        let mut bids: Vec<f64> = self.samples.iter().map(|&(_, b)| b).collect();
        bids.sort_by(f64::total_cmp);
        let count = bids.len();
        let median = if count % 2 == 1 {
            bids[count / 2]
        } else {
            (bids[count / 2 - 1] + bids[count / 2]) / 2.0
        };
        Some(Aggregates {
            avg: bids.iter().sum::<f64>() / count as f64,
            median,
            min: bids[0],
            max: bids[count - 1],
            count,
        })
    }
}

/// Decides a single request against the moving bid window, then records its
/// bid.
///
/// Without the executable or without capacity the request is offloaded.
/// Otherwise it runs iff its bid reaches the selected aggregate. An empty
/// window accepts.
pub fn threshold_decide(
    window: &mut BidWindow,
    now_ms: f64,
    bid: f64,
    has_executable: bool,
    has_capacity: bool,
    threshold: ThresholdAggregate,
) -> Decision {
    let decision = if !has_executable || !has_capacity {
        Decision::Offload
    } else {
        match window.aggregates(now_ms) {
            Some(agg) if bid < agg.select(threshold) => Decision::Offload,
            _ => Decision::Execute,
        }
    };
    window.observe(now_ms, bid);
    decision
}

/// True while fewer than `limit_per_window` requests were accepted in the
/// current window.
pub fn window_capacity(accepted_in_window: u32, limit_per_window: u32) -> bool {
    accepted_in_window < limit_per_window
}

/// Acceptance timestamps inside a moving window, for per-window limits.
#[derive(Debug, Clone)]
pub struct AcceptWindow {
    window_ms: f64,
    accepted: VecDeque<f64>,
}

impl AcceptWindow {
    pub fn new(window_ms: f64) -> Self {
        Self {
            window_ms,
            accepted: VecDeque::new(),
        }
    }

    pub fn count(&mut self, now_ms: f64) -> u32 {
        while let Some(&t) = self.accepted.front() {
            if t <= now_ms - self.window_ms {
                self.accepted.pop_front();
            } else {
                break;
            }
        }
        self.accepted.len() as u32
    }

    pub fn record(&mut self, now_ms: f64) {
        self.accepted.push_back(now_ms);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_with(bids: &[f64]) -> BidWindow {
        let mut w = BidWindow::new(1000.0);
        for (i, &b) in bids.iter().enumerate() {
            w.observe(i as f64, b);
        }
        w
    }

    #[test]
    fn above_average_executes() {
        let mut w = window_with(&[50.0, 150.0]);
        let d = threshold_decide(&mut w, 10.0, 120.0, true, true, ThresholdAggregate::Avg);
        assert_eq!(d, Decision::Execute);
    }

    #[test]
    fn below_average_offloads() {
        let mut w = window_with(&[100.0, 100.0]);
        let d = threshold_decide(&mut w, 10.0, 80.0, true, true, ThresholdAggregate::Avg);
        assert_eq!(d, Decision::Offload);
        // Recorded anyway.
        assert_eq!(w.aggregates(10.0).unwrap().count, 3);
    }

    #[test]
    fn empty_window_executes() {
        let mut w = BidWindow::new(1000.0);
        let d = threshold_decide(&mut w, 0.0, 1.0, true, true, ThresholdAggregate::Avg);
        assert_eq!(d, Decision::Execute);
    }

    #[test]
    fn missing_executable_or_capacity_offloads() {
        let mut w = BidWindow::new(1000.0);
        assert_eq!(
            threshold_decide(&mut w, 0.0, 500.0, false, true, ThresholdAggregate::Avg),
            Decision::Offload
        );
        assert_eq!(
            threshold_decide(&mut w, 0.0, 500.0, true, false, ThresholdAggregate::Avg),
            Decision::Offload
        );
    }

    #[test]
    fn aggregates_only_cover_window() {
        let mut w = BidWindow::new(1000.0);
        w.observe(0.0, 10.0);
        w.observe(500.0, 20.0);
        w.observe(900.0, 60.0);
        w.observe(999.0, 30.0);
        let a = w.aggregates(999.0).unwrap();
        assert_eq!((a.count, a.min, a.max, a.avg, a.median), (4, 10.0, 60.0, 30.0, 25.0));
        // The sample at t=0 falls out once now - window reaches it.
        let a = w.aggregates(1000.0).unwrap();
        assert_eq!((a.count, a.min, a.median), (3, 20.0, 30.0));
        assert!(w.aggregates(5000.0).is_none());
    }

    #[test]
    fn threshold_selectors() {
        let mut w = window_with(&[60.0, 70.0, 140.0]);
        for (agg, bid, expect) in [
            (ThresholdAggregate::Median, 70.0, Decision::Execute),
            (ThresholdAggregate::Max, 139.0, Decision::Offload),
            (ThresholdAggregate::Min, 60.0, Decision::Execute),
        ] {
            let mut copy = w.clone();
            assert_eq!(threshold_decide(&mut copy, 3.0, bid, true, true, agg), expect);
        }
        assert_eq!(w.aggregates(3.0).unwrap().avg, 90.0);
    }

    #[test]
    fn window_limit() {
        assert!(window_capacity(5, 6));
        assert!(!window_capacity(6, 6));
        let limits = [6, 12, 1000];
        assert!(limits.iter().all(|&l| window_capacity(l - 1, l) && !window_capacity(l, l)));

        let mut acc = AcceptWindow::new(1000.0);
        for t in 0..6 {
            acc.record(t as f64 * 100.0);
        }
        assert!(!window_capacity(acc.count(550.0), 6));
        assert!(window_capacity(acc.count(1000.5), 6));
    }
}

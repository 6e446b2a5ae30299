//! Deterministic simulator for auction-based placement of serverless
//! functions in an edge / intermediary / cloud hierarchy.
//!
//! Nodes sell storage for executables and processing slots for requests
//! through sealed-bid auctions. Requests that lose at a node move one hop
//! closer to the cloud, which accepts everything it stores.

pub mod auction;
pub mod cli;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod topology;
pub mod workload;

pub use config::SimConfig;
pub use engine::{preset, run_preset, simulate, SimError, Simulation};
pub use metrics::MetricsReport;

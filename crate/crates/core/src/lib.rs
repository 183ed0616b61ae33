//! Deterministic fluid simulator for adaptive bitrate streaming clients
//! competing over one bottleneck link.
//!
//! The controller stack per client is: per-segment throughput measurement
//! with adaptive smoothing ([`estimator`]), logarithmic-increase
//! multiplicative-decrease probing ([`prober`]) and a buffer-zoned bitrate
//! decision ([`adapter`]). [`netsim`] runs many clients against a capacity
//! schedule and [`metrics`] scores the result.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapter;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod prober;
pub mod runner;
pub mod state;
pub mod sweep;

pub use adapter::{AdaptationDecision, PolicyKind, RatePolicy};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use metrics::{summarize, MetricsOptions, MetricsReport};
pub use model::{ladder_ceiling, ladder_floor, BitrateLadder, PolicyParams, Selection};
pub use netsim::{run_scenario, CapacitySchedule, ClientSpec, Scenario, SessionLog};
pub use runner::{simulate, RunOutput};
pub use state::ClientState;

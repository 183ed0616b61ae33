//! Fluid simulation of clients sharing one bottleneck.

mod fluid;
mod log;
mod schedule;
mod sim;

pub use fluid::{fair_share_progress, next_completion_time};
pub use log::{ClientLog, DecisionRecord, InFlight, SegmentRecord, SessionLog, SESSIONS_HEADER};
pub use schedule::{load_trace, parse_trace, CapacitySchedule};
pub use sim::{run_scenario, ClientSpec, EventKind, Scenario, SimEvent};

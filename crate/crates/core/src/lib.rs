//! Uplink resource management and data planning for 6G digital-twin sensor networks.
//!
//! The crate is organised along the retrieval pipeline:
//!
//! * [`planner`] turns a natural-language query into a [`planner::RetrievalPlan`] through a
//!   Manager/Planner/Reviewer/Coder/Executor conversation over a pluggable model backend.
//! * [`convertor`] maps the plan onto device positions and payload sizes.
//! * [`traffic`] forecasts per-cell load and gates each device onto 6G or Zigbee.
//! * [`channel`] and [`rrm`] draw the uplink channel and solve the min-max delay
//!   resource-block assignment, repairing constraint violations round by round.
//! * [`harness`] wires everything together and produces the latency reports.

pub mod channel;
pub mod convertor;
pub mod harness;
pub mod planner;
pub mod rrm;
pub mod scenario;
pub mod traffic;

pub use channel::{ChannelParams, ChannelRealization};
pub use rrm::{RrmProblem, RrmSolution};
pub use scenario::{IoTDevice, Scenario, ZigbeeParams};

//! Crowdshipping dispatch and relocation engine.
//!
//! The crate covers the full loop of an on-demand crowdshipping operator:
//! periodic assignment of pickup/delivery requests to time-limited couriers
//! through a memory-based wave search, proactive relocation of idle couriers
//! via a min-cost-flow sizing step and a cluster/job virtual assignment,
//! comparison baselines behind the same solver interface, and a
//! deterministic whole-day simulator with CSV reporting.

pub mod baselines;
pub mod construction;
pub mod domain;
pub mod geometry;
pub mod mtamp;
pub mod oracle;
pub mod relocation;
pub mod sim;

//! Proactive relocation of idle couriers: flow-based sizing, clustering,
//! feasible-job formation, the virtual assignment, and concrete orders.

pub mod cluster;
pub mod flow;
pub mod jobs;
mod mincost;
pub mod mkp;
pub mod orders;

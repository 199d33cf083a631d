//! Independent verification oracles and the validation suites built on them.
//!
//! Everything here deliberately re-derives results through a different
//! algorithmic route than the production code it checks: a dense two-phase
//! simplex instead of the min-cost flow, exhaustive enumeration instead of
//! branch and bound, and dynamic programming over full routing permutations
//! instead of neighborhood search.

pub mod ilp;
pub mod micro;
pub mod mkp_enum;
pub mod simplex;
pub mod suites;

//! Simulator and optimizer for green-energy and latency aware load balancing in
//! two-tier cellular networks.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod optimizer;
pub mod scenario;
pub mod baselines;
pub mod evaluation;
pub mod experiment;

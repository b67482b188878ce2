//! Multi-antenna precoding: scenario catalog, closed-form baseline precoders,
//! iterative solvers and the metric/feasibility evaluation they share.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod metrics;
pub mod model;
pub mod precoders;
pub mod rng;
pub mod scenarios;
pub mod solvers;

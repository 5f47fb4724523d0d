// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod data_model;
pub mod error;
pub mod gevr;
pub mod mcmc;
pub mod nhgr;
pub mod pipeline;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod synoptic;
pub mod trend;

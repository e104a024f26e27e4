// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod scalar;
pub mod strategies;

pub use error::{EbeError, Result};
pub use scalar::Scalar;

pub type QTable64 = learners::QTable<f64>;
pub type QTable32 = learners::QTable<f32>;
pub type Mlp64 = learners::Mlp<f64>;
pub type Mlp32 = learners::Mlp<f32>;
pub type DqnAgent64 = learners::DqnAgent<f64>;
pub type DqnAgent32 = learners::DqnAgent<f32>;
pub type Strategy64 = strategies::Strategy<f64>;
pub type Strategy32 = strategies::Strategy<f32>;
pub type QModel64 = learners::QModel<f64>;

//! U- and V-statistics of strictly stationary absolutely regular (β-mixing)
//! sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`process`]: stationary sequence models with computable β-mixing
//!   coefficients and seeded path sampling.
//! - [`kernel`]: bounded kernels of order `r`, Hoeffding projection and the
//!   long-run variance of the projection.
//! - [`stat`]: U/V-statistic evaluation, standardization and an exact
//!   enumeration oracle for the first two moments.
//! - [`depgraph`]: the implicit characterizing graph on kernel terms, its
//!   neighbourhood bounds and exact audits of the factorization inequalities.
//! - [`conditions`]: numeric evaluation of the asymptotic-normality conditions
//!   and the block-length schedule.
//! - [`mc`]: the Monte Carlo harness that checks moment and distribution
//!   function convergence against the standard normal law.
//! - [`report`]: float formatting shared by the JSON and CSV writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combin;
pub mod conditions;
pub mod depgraph;
mod error;
pub mod kernel;
pub mod mc;
pub mod process;
pub mod report;
pub mod rng;
pub mod stat;
pub mod sum;

pub use error::{Error, Result};

/// Maximum number of paths any exact enumeration may visit (2^22).
pub const ENUMERATION_BUDGET: u64 = 1 << 22;

/// Statistic family: increasing index tuples (U) or all ordered tuples (V).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    U,
    V,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::U => f.write_str("U"),
            Mode::V => f.write_str("V"),
        }
    }
}

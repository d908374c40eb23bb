//! Focal and cut loci of submanifolds in Finsler manifolds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cut;
pub mod error;
pub mod expr;
pub mod focal;
pub mod geodesic;
pub mod jacobi;
pub mod metric;
pub mod ode;
pub mod oracle;
pub mod plot;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod shooting;
pub mod submanifold;
pub mod verify;

pub use error::{Error, Result};

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biped;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod optimizer;
pub mod regularity;

pub use error::{Error, Result};

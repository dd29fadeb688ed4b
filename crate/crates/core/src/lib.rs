//! Randomness generation with braided Majorana qubits, certified through
//! violation of the three-party MABK inequality.

// `!(x < y)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod certify;
pub mod error;
pub mod extract;
pub mod logical;
pub mod mabk;
pub mod majorana;
pub mod trials;
pub mod validate;

pub use error::{Error, Result};

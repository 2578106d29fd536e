//! Point-process models of vowel inventories.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod linalg;
pub mod pointprocess;
pub mod rng;
pub mod synthetic;
pub mod training;
pub mod vowelset;

pub use error::{Error, Result};
pub use vowelset::VowelSet;

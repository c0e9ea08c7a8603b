#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod ergodicity;
pub mod error;
pub mod expr;
pub mod flow;
pub mod fraccalc;
pub mod holder;
pub mod hormander;
pub mod malliavin;
pub mod noise;
pub mod path;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

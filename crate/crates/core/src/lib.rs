// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod config;
pub mod curve;
pub mod cutoff;
pub mod error;
pub mod expansion;
pub mod grid;
pub mod io;
pub mod layer;
pub mod metrics;
pub mod pde;
pub mod periodic;
pub mod potential;
pub mod profile;
pub mod spectral;
pub mod study;
pub mod velocity;

pub use error::{Error, Result};

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod fit;
pub mod forward;
pub mod green;
pub mod lattice;
pub mod phaseless;
pub mod recover;

pub use error::{Error, Result};

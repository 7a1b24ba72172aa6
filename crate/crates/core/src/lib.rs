//! Spin dynamics of chiral radical pairs probed by a shallow NV center.
//!
//! The crate builds radical-pair initial states, propagates them under
//! Zeeman, dipolar and Lee–Goldburg decoupling Hamiltonians, simulates
//! pulsed ODMR spectra of a nearby NV center and evaluates ensemble
//! frequency shifts of masked molecular monolayers on diamond.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod hamiltonians;
pub mod odmr;
pub mod sequences;
pub mod spinmath;
pub mod states;
pub mod surface;

pub use error::{Error, Result};

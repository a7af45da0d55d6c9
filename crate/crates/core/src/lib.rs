//! Modelling and metrology toolkit for waveguide-integrated superconducting
//! nanowire single-photon detectors on Ti-indiffused lithium niobate.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `is_multiple_of` is newer than the supported toolchain.
#![allow(clippy::manual_is_multiple_of)]

pub mod cli;
pub mod config;
pub mod countsim;
pub mod eigen;
pub mod error;
pub mod export;
pub mod materials;
pub mod metrology;
pub mod modesolver;
pub mod profile;
pub mod reproduce;
pub mod taper;

pub use error::{Error, Result};

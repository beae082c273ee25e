//! Multi-coil MRI toolbox: acquisition simulation, PICS and NLINV
//! reconstruction with pluggable priors, score-based diffusion priors and
//! phase augmentation of magnitude images.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod dataprep;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod phase_aug;
pub mod priors;
pub mod recon;
pub mod rng;
pub mod score_model;

pub use error::{Error, Result};

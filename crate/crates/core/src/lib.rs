//! Differentially private mean estimation built on the trimmed mean, its
//! smooth sensitivity, and heavy-tailed noise distributions whose privacy
//! guarantees are stated as concentrated differential privacy.
//!
//! The crate is `no_std` and only needs `alloc`. Randomness is supplied by
//! the caller through [`rand::Rng`].

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accounting;
pub mod bounds;
pub mod calibration;
pub mod distributions;
pub mod divergence;
mod error;
pub mod math;
pub mod mechanism;
pub mod quadrature;
pub mod sensitivity;

pub use accounting::PrivacyBudget;
pub use distributions::{CostOptions, DistortionPair, NoiseFamily, NoiseSpec};
pub use error::{Error, Result};
pub use mechanism::{MechanismConfig, ReleaseRecord};
pub use sensitivity::{SensitivityReport, SortedDataset, TrimSpec, TruncationMode};

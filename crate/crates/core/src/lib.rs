//! Database alignment end to end: generate pairs of databases correlated
//! through a hidden bijection, recover the bijection with the
//! max-weight-matching MAP estimator, measure correlation by cycle mutual
//! information, and probe the exact-recovery threshold empirically.
//!
//! Module map:
//! - [`dist`] — joint distributions, product forms, sampling, likelihoods
//! - [`spectral`] — singular-value profiles, Renyi entropy, cycle MI
//! - [`matching`] — Hungarian solver, factorial oracle, cycle types
//! - [`bounds`] — generating functions and finite-n error bounds
//! - [`experiments`] — seeded trial runner and threshold sweeps
//! - [`cli`] — the command-line front end (feature `cli`)

pub mod bounds;
#[cfg(feature = "cli")]
pub mod cli;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod matching;
pub mod rng;
pub mod spectral;

pub use dist::{DatabasePair, JointDistribution, Matching, ProductForm};
pub use error::{Error, Result};
pub use linalg::Mat;
pub use spectral::SpectralProfile;

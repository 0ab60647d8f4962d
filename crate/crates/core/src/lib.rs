//! Metric-measure entropy of α-stable Lévy processes on Skorokhod space,
//! at experimental scale.
//!
//! - [`cadlag`]: step functions with drift, sup-norm and oscillation.
//! - [`skorokhod`]: exact J-distance decisions with matching certificates.
//! - [`levy`]: exact simulation of the large- and small-jump parts.
//! - [`net`]: the two certified quantizers and their log-cardinality bounds.
//! - [`entropy`]: greedy empirical covering, lower-bound curves, scaling fits.
//! - [`checks`]: property suites shared by the CLI and the acceptance tests.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cadlag;
pub mod checks;
pub mod entropy;
pub mod error;
pub mod levy;
pub mod net;
pub mod rng;
pub mod skorokhod;
pub mod stats;

pub use cadlag::{Jump, StepFunction};
pub use error::{Error, Result};
pub use levy::{PathPair, StableParams};
pub use skorokhod::{distance, within, Decision, DistanceResult, MatchingCertificate};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

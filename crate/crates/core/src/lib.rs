//! Deterministic single-process simulator for federated learning with
//! server-guided, gradient-matching coreset selection on the clients.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: synthetic blobs, stratified splits, Dirichlet partitioning and
//!   the three noise injectors (closed-set, open-set, attribute).
//! - [`model`]: softmax regression and a one-hidden-layer network with
//!   per-sample last-layer gradients and mini-batch SGD.
//! - [`coreset`]: orthogonal matching pursuit gradient matching (plain and
//!   label-wise), random and facility-location selection.
//! - [`federation`]: the round protocol for every algorithm arm plus cost
//!   accounting.
//! - [`metrics`]: accuracy, coreset composition, CSV round logs and JSON
//!   summaries.
//! - [`config`]: the experiment configuration and its TOML representation.

pub mod config;
pub mod coreset;
pub mod data;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod model;
pub mod seed;

pub use error::{Error, Result};

/// Version string recorded in run manifests.
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds half away from zero and converts to a count.
///
/// Every "round(ratio * n)" sample count in the crate goes through here so
/// counts agree across platforms.
pub fn round_count(x: f64) -> usize {
    debug_assert!(x >= 0.0 && x.is_finite());
    x.round() as usize
}

//! Algorithmic couplings between Erdős–Rényi graphs and spherical random
//! geometric graphs, a multi-round recursive extension, and a robust testing
//! bench, with the Monte Carlo harness that exercises them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod flip;
pub mod graph;
pub mod graphstats;
pub mod recursive;
pub mod rng;
pub mod robust;
pub mod special;
pub mod sphere_law;
pub mod stats;

pub use error::{Error, Result};
pub use sphere_law::{sample_sphere, tau_threshold, Interval, SphericalLaw};

//! Numerical laboratory for Sudakov-type minoration of log-concave vectors.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: reproducible samplers for the supported families.
//! * [`analytic`]: closed-form and two-sided moment formulas.
//! * [`empirical`]: Monte Carlo estimators with bootstrap errors.
//! * [`geometry`]: packings, coverings, separated sets, orthogonal decomposition.
//! * [`chaining`]: admissible sequences and chaining moment bounds.
//! * [`experiments`]: end-to-end pipelines producing [`report::ExperimentReport`]s.

pub mod analytic;
pub mod chaining;
pub mod distributions;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use rng::Seed;

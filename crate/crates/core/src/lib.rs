//! Numerical laboratory for semilinear parabolic equations driven by
//! infinite-dimensional fractional noise on horn-shaped domains.
//!
//! The crate samples fractional Brownian motions exactly, builds a spectral
//! realization of the noise on a discretized horn, integrates pathwise
//! against the sampled paths, and checks the estimates that control those
//! integrals.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod domain;
pub mod error;
pub mod fbm;
pub mod grr;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod young;

pub use error::{Error, Result};
pub use fbm::{fbm_covariance, sample_fbm, sample_fbm_family, FbmMethod, FbmPath, FbmSampler, HurstSequence, TimeGrid};
pub use grr::{constraint_audit, grr_check, grr_functional, theta_estimate, ConstraintReport, GrrExponents, GrrReport};
pub use young::{estimate_lambda, holder_exponent, stieltjes_bound, young_integrate, IntegrandPath, LambdaEstimate};

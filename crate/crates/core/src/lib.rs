//! Subspace-projection regression on network-linked data.
//!
//! Estimation, confidence intervals and a chi-squared network-effect test
//! that stay valid when the observed network is a noisy version of the true
//! relational structure, together with block-model estimators of that
//! structure, rank selection for the covariate/network subspace overlap,
//! baseline regressors and a Monte Carlo harness.

// Link line: pulls in the system OpenBLAS for both ndarray-linalg and the raw
// LAPACK calls in `linalg`.
extern crate openblas_src as _;

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod network;
pub mod rank;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{FitConfig, FitResult};
pub use linalg::EigenDirection;
pub use network::{AdjacencyMatrix, CommunityAssignment, NetworkEstimate, ProbabilityMatrix};
pub use spectral::{AlignmentSvd, OrthonormalBasis, ProjectionSet};

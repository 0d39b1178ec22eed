//! Marginal-likelihood estimation for Gaussian-process probit classification.
//!
//! The crate provides three families of log-evidence estimators over one
//! shared model — latent `x ~ N(0, K)` observed through probit links
//! `p(y_n | x_n) = Phi(y_n x_n)`:
//!
//! * [`ep`] — Expectation Propagation, giving a deterministic Gaussian
//!   approximation `q` and its own `log Z` estimate;
//! * [`ais`] — Annealed Importance Sampling along a geometric temperature
//!   grid, annealing from the prior or from `q`, with plain-HMC or
//!   Riemannian-HMC transition kernels ([`mcmc`]);
//! * [`smc`] — resample-move SMC on the sign-constrained representation
//!   `z ~ N(0, K + I)`, introducing one likelihood constraint at a time with
//!   truncated-Gaussian Gibbs moves.
//!
//! [`quadrature`] supplies an independent orthant-probability oracle for
//! problems of dimension at most three, which is what the estimators are
//! validated against.

pub mod ais;
pub mod ep;
mod erf;
pub mod error;
pub mod linalg;
pub mod mcmc;
pub mod probit;
pub mod quadrature;
pub mod rng;
pub mod smc;
pub mod target;

pub use error::{Error, Result};
pub use linalg::{build_kernel, cholesky, CholFactor, KernelSpec, SpdMatrix};
pub use target::{GaussianReference, MetricState, TemperedTarget};

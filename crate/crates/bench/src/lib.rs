//! Shared problem builders for the criterion benchmarks.

use ndarray::{Array1, Array2};
use rand::Rng;

use gpc_core::rng::stream_rng;
use gpc_core::target::TemperedTarget;
use gpc_core::{build_kernel, KernelSpec, SpdMatrix};

/// Random smooth-kernel classification problem of size `n`.
pub fn problem(n: usize, seed: u64) -> (SpdMatrix, Array1<f64>) {
    let mut rng = stream_rng(seed, 0);
    let pts = Array2::from_shape_fn((n, 2), |_| 2.0 * rng.random::<f64>());
    let spec = KernelSpec::new(0.4, 1.3, 1e-6).expect("valid spec");
    let k = build_kernel(pts.view(), &spec).expect("finite inputs");
    let y = Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
    (k, y)
}

/// Posterior-tempered target over the problem above.
pub fn posterior(n: usize, seed: u64) -> TemperedTarget {
    let (k, y) = problem(n, seed);
    TemperedTarget::prior_reference(y, k, 1.0).expect("valid target")
}

/// A latent vector to evaluate at.
pub fn position(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = stream_rng(seed, 1);
    Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5)
}

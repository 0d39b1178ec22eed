//! Kernel construction and dense symmetric-positive-definite linear algebra.
//!
//! Everything downstream (the tempered target, EP, the samplers) is built on
//! the pieces here: squared-exponential kernel matrices, Cholesky factors
//! with log-determinants, triangular solves and row scaling. Matrices are
//! dense; problem sizes are at most a few hundred, so the O(N^3) cost is the
//! intended regime.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Squared-exponential kernel parameters.
///
/// `k(a, b) = amplitude^2 * exp(-0.5 * |a - b|^2 / lengthscale^2)`, with
/// `jitter` added to the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub lengthscale: f64,
    pub amplitude: f64,
    pub jitter: f64,
}

impl KernelSpec {
    pub fn new(lengthscale: f64, amplitude: f64, jitter: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::invalid(format!(
                "lengthscale must be a positive finite real, got {lengthscale}"
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid(format!(
                "amplitude must be a positive finite real, got {amplitude}"
            )));
        }
        if !(jitter >= 0.0) || !jitter.is_finite() {
            return Err(Error::invalid(format!(
                "jitter must be a nonnegative finite real, got {jitter}"
            )));
        }
        Ok(KernelSpec {
            lengthscale,
            amplitude,
            jitter,
        })
    }

    /// Spec with the default diagonal jitter `1e-8 * amplitude^2`.
    ///
    /// Duplicated inputs make the raw kernel matrix singular; the scaled
    /// jitter keeps the factorisation alive without visibly distorting the
    /// model. Pass jitter 0 through [`KernelSpec::new`] to disable.
    pub fn with_default_jitter(lengthscale: f64, amplitude: f64) -> Result<Self> {
        let jitter = 1e-8 * amplitude * amplitude;
        KernelSpec::new(lengthscale, amplitude, jitter)
    }
}

/// Dense symmetric positive-definite matrix.
///
/// Symmetry is checked on construction; positive definiteness is established
/// indirectly when [`cholesky`] succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    entries: Array2<f64>,
}

impl SpdMatrix {
    /// Wraps a square matrix, requiring symmetry to 1e-12 relative.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::dims(format!("expected square matrix, got {r}x{c}")));
        }
        let mut asym = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..r {
            for j in (i + 1)..r {
                asym = asym.max((entries[[i, j]] - entries[[j, i]]).abs());
            }
            for j in 0..r {
                let v = entries[[i, j]];
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite entry {v} at ({i}, {j})"
                    )));
                }
                scale = scale.max(v.abs());
            }
        }
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::invalid(format!(
                "matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(SpdMatrix { entries })
    }

    /// Wraps a matrix that is symmetric by construction (e.g. `A - V^T V`
    /// with symmetric `A`). Debug builds still verify.
    pub(crate) fn from_symmetric_unchecked(entries: Array2<f64>) -> Self {
        debug_assert!({
            let n = entries.nrows();
            (0..n).all(|i| (0..n).all(|j| entries[[i, j]] == entries[[j, i]]))
        });
        SpdMatrix { entries }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    /// `self + shift * I`, used e.g. to form `K + I` for the augmented model.
    pub fn shifted_diagonal(&self, shift: f64) -> SpdMatrix {
        let mut m = self.entries.clone();
        for i in 0..m.nrows() {
            m[[i, i]] += shift;
        }
        SpdMatrix { entries: m }
    }
}

/// Lower-triangular Cholesky factor together with the log-determinant of the
/// factored matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    lower: Array2<f64>,
    log_det: f64,
}

impl CholFactor {
    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    /// log-determinant of the original matrix, `2 * sum(log L_nn)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn order(&self) -> usize {
        self.lower.nrows()
    }
}

/// Builds the squared-exponential kernel matrix for `inputs` (one point per
/// row). The upper triangle is computed and mirrored, so the result is
/// exactly symmetric.
pub fn build_kernel(inputs: ArrayView2<'_, f64>, spec: &KernelSpec) -> Result<SpdMatrix> {
    let (n, d) = inputs.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "inputs must be a nonempty N x D matrix, got {n}x{d}"
        )));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("inputs contain non-finite coordinates"));
    }
    let var = spec.amplitude * spec.amplitude;
    let inv_two_ell2 = 0.5 / (spec.lengthscale * spec.lengthscale);
    let mut k = Array2::zeros((n, n));
    for m in 0..n {
        k[[m, m]] = var + spec.jitter;
        for j in (m + 1)..n {
            let mut dist2 = 0.0;
            for t in 0..d {
                let diff = inputs[[m, t]] - inputs[[j, t]];
                dist2 += diff * diff;
            }
            let v = var * (-dist2 * inv_two_ell2).exp();
            k[[m, j]] = v;
            k[[j, m]] = v;
        }
    }
    Ok(SpdMatrix::from_symmetric_unchecked(k))
}

/// Cholesky factorisation `A = L L^T`.
///
/// Fails with [`Error::NotPositiveDefinite`] carrying the 1-based index of
/// the first non-positive pivot. Failure is never papered over with
/// regularisation here; a singular matrix signals a modelling problem in the
/// caller.
pub fn cholesky(a: &SpdMatrix) -> Result<CholFactor> {
    let n = a.order();
    let m = a.entries();
    let mut l = Array2::<f64>::zeros((n, n));
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = m[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        log_det += 2.0 * ljj.ln();
        for i in (j + 1)..n {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(CholFactor { lower: l, log_det })
}

fn check_solve_dims(tri: ArrayView2<'_, f64>, rhs_rows: usize) -> Result<usize> {
    let (r, c) = tri.dim();
    if r != c {
        return Err(Error::dims(format!("triangular matrix is {r}x{c}")));
    }
    if rhs_rows != r {
        return Err(Error::dims(format!(
            "triangular matrix is {r}x{r} but right-hand side has {rhs_rows} rows"
        )));
    }
    Ok(r)
}

/// Solves `L X = B` by forward substitution, `L` lower triangular. Works
/// row-by-row so every inner update is a contiguous axpy over a whole
/// right-hand-side row.
pub fn solve_lower(l: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = check_solve_dims(l, b.nrows())?;
    let mut x = b.to_owned();
    for i in 0..n {
        let (done, mut rest) = x.view_mut().split_at(ndarray::Axis(0), i);
        let mut row_i = rest.row_mut(0);
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                row_i.scaled_add(-lik, &done.row(k));
            }
        }
        let inv = 1.0 / l[[i, i]];
        row_i.mapv_inplace(|v| v * inv);
    }
    Ok(x)
}

/// Solves `U X = B` by back substitution, `U` upper triangular (typically
/// `L.t()` from a Cholesky factor).
pub fn solve_upper(u: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = check_solve_dims(u, b.nrows())?;
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        let (mut head, tail) = x.view_mut().split_at(ndarray::Axis(0), i + 1);
        let mut row_i = head.row_mut(i);
        for k in (i + 1)..n {
            let uik = u[[i, k]];
            if uik != 0.0 {
                row_i.scaled_add(-uik, &tail.row(k - i - 1));
            }
        }
        let inv = 1.0 / u[[i, i]];
        row_i.mapv_inplace(|v| v * inv);
    }
    Ok(x)
}

/// Vector form of [`solve_lower`].
pub fn solve_lower_vec(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = check_solve_dims(l, b.len())?;
    let mut x = b.to_owned();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Vector form of [`solve_upper`].
pub fn solve_upper_vec(u: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = check_solve_dims(u, b.len())?;
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= u[[i, k]] * x[k];
        }
        x[i] = s / u[[i, i]];
    }
    Ok(x)
}

/// Row-wise product `diag(s) * A`: row `i` of `A` scaled by `s[i]`.
pub fn row_scale(a: ArrayView2<'_, f64>, s: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
    if a.nrows() != s.len() {
        return Err(Error::dims(format!(
            "matrix has {} rows but scale vector has {} entries",
            a.nrows(),
            s.len()
        )));
    }
    let mut out = a.to_owned();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let si = s[i];
        row.mapv_inplace(|v| si * v);
    }
    Ok(out)
}

/// Computes `( (A^-1 + diag(t)^2)^-1, log |I + A o t t^T| )` with one
/// Cholesky round: the first output is the downdate `A - V^T V`, assembled
/// to be exactly symmetric.
pub(crate) fn woodbury_downdate(a: &SpdMatrix, t: &Array1<f64>) -> Result<(SpdMatrix, f64)> {
    let n = a.order();
    if t.len() != n {
        return Err(Error::dims(format!(
            "scale vector has {} entries for a matrix of order {n}",
            t.len()
        )));
    }
    let mut cap = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            cap[[i, j]] = a.entries()[[i, j]] * (t[i] * t[j]);
        }
        cap[[i, i]] += 1.0;
    }
    let chol_cap = cholesky(&SpdMatrix::from_symmetric_unchecked(cap))?;
    let scaled = row_scale(a.entries().view(), t.view())?;
    let v = solve_lower(chol_cap.lower().view(), scaled.view())?;
    let vtv = v.t().dot(&v);
    // The blocked matrix product does not promise bitwise-symmetric output;
    // average the two triangles before subtracting.
    let mut down = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            down[[i, j]] = a.entries()[[i, j]] - 0.5 * (vtv[[i, j]] + vtv[[j, i]]);
        }
    }
    Ok((
        SpdMatrix::from_symmetric_unchecked(down),
        chol_cap.log_det(),
    ))
}

/// Dense inverse from a Cholesky factor (solve against the identity). Used
/// by oracles and the Gibbs precision matrix, not on any hot path.
pub fn inverse_from_chol(chol: &CholFactor) -> Array2<f64> {
    let n = chol.order();
    let eye = Array2::<f64>::eye(n);
    let half = solve_lower(chol.lower().view(), eye.view()).expect("factor dims match identity");
    solve_upper(chol.lower().t(), half.view()).expect("factor dims match identity")
}

//! Empirical eigenvalue decay of Gram matrices.
//!
//! The decay exponent is the least-squares slope of `log s_k` against
//! `log k` over a chosen index range. Index 1 is always skipped, as are
//! eigenvalues below `1e−12 · s_max`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional_data::{CurveSet, QuadratureRule};
use crate::kernels::{gram_matrix, Kernel};
use crate::linalg::{is_symmetric, symmetric_eigen};
use crate::simulation::sample_curve;

const NOISE_FLOOR: f64 = 1e-12;
const NEGATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// All eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Fitted slope of `log s_k` on `log k`.
    pub exponent: f64,
    pub intercept: f64,
    /// 1-based indices actually used by the fit.
    pub k_min: usize,
    pub k_max: usize,
}

/// Spectrum of a symmetric PSD matrix and its decay exponent over
/// `k_min..=k_max` (1-based).
pub fn empirical_eigendecay(m: &DMatrix<f64>, k_min: usize, k_max: usize) -> Result<DecayReport> {
    let n = m.nrows();
    if m.ncols() != n || !is_symmetric(m, 1e-10) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("decay input"));
    }
    if k_min > k_max || k_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "bad index range {k_min}..={k_max}"
        )));
    }
    if n < k_max + 2 {
        return Err(Error::InvalidArgument(format!(
            "a {n}x{n} matrix is too small for index range up to {k_max}"
        )));
    }
    let (values, _) = symmetric_eigen(m);
    let top = values[0];
    if !(top > 0.0) {
        return Err(Error::InvalidArgument(
            "matrix has no positive eigenvalue".into(),
        ));
    }
    if values[n - 1] < -NEGATIVE_TOL * top {
        return Err(Error::InvalidArgument(format!(
            "matrix is not positive semi-definite (eigenvalue {})",
            values[n - 1]
        )));
    }
    let lo = k_min.max(2);
    let mut pts = Vec::new();
    for k in lo..=k_max {
        let s = values[k - 1];
        if s < NOISE_FLOOR * top {
            break;
        }
        pts.push(((k as f64).ln(), s.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(
            "fewer than two eigenvalues above the noise floor in the fit range".into(),
        ));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Ok(DecayReport {
        eigenvalues: values.iter().copied().collect(),
        exponent,
        intercept: my - exponent * mx,
        k_min: lo,
        k_max: lo + pts.len() - 1,
    })
}

/// `G / n` for `n` seeded draws `Z ~ U(0, 1)`.
pub fn scalar_gram_proxy(kernel: &dyn Kernel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<[f64; 1]> = (0..n).map(|_| [rng.random::<f64>()]).collect();
    Ok(gram_matrix(kernel, &z)? / n as f64)
}

/// `Σ / n` for `n` seeded simulated curves with smoothness `υ₁`.
pub fn functional_gram_proxy(
    kernel: &dyn Kernel,
    q: &QuadratureRule,
    n: usize,
    upsilon1: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = q.grid();
    let curves = (0..n)
        .map(|_| sample_curve(upsilon1, &mut rng).map(|c| c.render(grid)))
        .collect::<Result<Vec<_>>>()?;
    let curves = CurveSet::from_curves(&curves)?;
    Ok(crate::functional_data::build_sigma(&curves, kernel, q)? / n as f64)
}

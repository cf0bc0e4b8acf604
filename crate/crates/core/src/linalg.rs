//! Dense symmetric linear algebra shared by the solvers.
//!
//! Every solve goes through a Cholesky factorization. A factorization that
//! fails is retried exactly once with a diagonal jitter of
//! `JITTER * trace / n`; a second failure is reported as [`Error::Singular`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative size of the single diagonal jitter applied on factorization failure.
pub const JITTER: f64 = 1e-10;

pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jittered: bool,
}

impl SpdFactor {
    /// Factor a symmetric positive (semi-)definite matrix.
    pub fn new(m: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(SpdFactor {
                chol,
                jittered: false,
            });
        }
        let n = m.nrows().max(1);
        let mut scale = m.trace().abs() / n as f64;
        if scale == 0.0 {
            scale = 1.0;
        }
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += JITTER * scale;
        }
        Cholesky::new(shifted)
            .map(|chol| SpdFactor {
                chol,
                jittered: true,
            })
            .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
    }

    /// Factor without the jitter fallback; used for small normal matrices
    /// whose failure means a genuinely rank-deficient design.
    pub fn strict(m: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Cholesky::new(m.clone())
            .map(|chol| SpdFactor {
                chol,
                jittered: false,
            })
            .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let mut inv = self.chol.inverse();
        symmetrize(&mut inv);
        inv
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// nonincreasing order (columns of the returned matrix follow the same order).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Replace `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    (0..n).all(|i| ((i + 1)..n).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

/// A factor `F` with `F Fᵀ = m` for a symmetric PSD matrix, built from its
/// eigen-decomposition with negative rounding noise clamped to zero.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, mut vectors) = symmetric_eigen(m);
    for (k, v) in values.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        vectors.column_mut(k).scale_mut(s);
    }
    vectors
}

pub(crate) fn check_finite_vec(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let (vals, vecs) = symmetric_eigen(&m);
        assert_eq!(vals.as_slice(), &[3.0, 2.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_gets_one_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = SpdFactor::new(&m, "test").unwrap();
        assert!(f.jittered());
        assert!(SpdFactor::strict(&m, "test").is_err());
    }

    #[test]
    fn psd_factor_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = psd_factor(&m);
        assert!((&f * f.transpose() - &m).amax() < 1e-12);
    }
}

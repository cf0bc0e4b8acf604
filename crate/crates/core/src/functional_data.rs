//! Curves on a uniform grid over `[0, 1]`, quadrature, and the functional
//! Gram matrices `Σ` and `A`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, Kernel};

pub const DEFAULT_GRID_POINTS: usize = 201;

/// Uniform grid `t_i = i / (M − 1)`, `M` odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    len: usize,
}

impl Grid {
    pub fn new(len: usize) -> Result<Self> {
        if len < 3 || len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "grid size must be odd and at least 3, got {len}"
            )));
        }
        Ok(Grid { len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.len - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / (self.len - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            len: DEFAULT_GRID_POINTS,
        }
    }
}

/// Quadrature weights on a grid; composite Simpson by default.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    grid: Grid,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn simpson(grid: Grid) -> Self {
        let h = grid.step();
        let m = grid.len();
        let weights = (0..m)
            .map(|i| {
                let c = if i == 0 || i == m - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        QuadratureRule { grid, weights }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Simpson approximation of `∫₀¹ f`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                what: "integrand samples",
                expected: self.weights.len(),
                found: f.len(),
            });
        }
        Ok(self.weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }
}

/// Free-function form of [`QuadratureRule::integrate`].
pub fn integrate(q: &QuadratureRule, f: &[f64]) -> Result<f64> {
    q.integrate(f)
}

/// A functional covariate sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "curve samples",
                expected: grid.len(),
                found: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("curve samples"));
        }
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Curve::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, a: f64) -> Curve {
        Curve {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }
}

/// `φ₁(t) = 1`, `φ_{k+1}(t) = √2 cos(kπt)`; `index` is 1-based.
pub fn cosine_basis(index: usize, t: f64) -> f64 {
    if index == 1 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * ((index - 1) as f64 * std::f64::consts::PI * t).cos()
    }
}

/// Coefficients of a truncated expansion in the cosine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineExpansion {
    pub coeffs: Vec<f64>,
}

impl CosineExpansion {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if !coeffs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cosine coefficients"));
        }
        Ok(CosineExpansion { coeffs })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, b)| b * cosine_basis(k + 1, t))
            .sum()
    }

    pub fn render(&self, grid: Grid) -> Curve {
        render(self, grid)
    }
}

/// Pointwise evaluation of a cosine series on a grid.
pub fn render(e: &CosineExpansion, grid: Grid) -> Curve {
    Curve {
        grid,
        values: grid.points().into_iter().map(|t| e.eval(t)).collect(),
    }
}

/// Tabulated cosine basis `Φ[i][k] = φ_{k+1}(t_i)`, for rendering many
/// expansions with one matrix product.
pub fn cosine_design(grid: Grid, terms: usize) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), terms, |i, k| cosine_basis(k + 1, grid.point(i)))
}

/// `∫ X(t) β(t) dt`.
pub fn functional_dot(x: &Curve, beta: &Curve, q: &QuadratureRule) -> Result<f64> {
    if x.grid != beta.grid || x.grid != q.grid {
        return Err(Error::GridMismatch);
    }
    Ok(q.weights
        .iter()
        .zip(x.values.iter().zip(&beta.values))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// `n` curves on one grid, stored column-wise (`M × n`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    grid: Grid,
    values: DMatrix<f64>,
}

impl CurveSet {
    pub fn from_curves(curves: &[Curve]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty curve set".into()))?;
        let grid = first.grid;
        if curves.iter().any(|c| c.grid != grid) {
            return Err(Error::GridMismatch);
        }
        let values = DMatrix::from_fn(grid.len(), curves.len(), |i, j| curves[j].values[i]);
        Ok(CurveSet { grid, values })
    }

    /// Columns are curves.
    pub fn from_matrix(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "curve samples",
                expected: grid.len(),
                found: values.nrows(),
            });
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument("empty curve set".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("curve samples"));
        }
        Ok(CurveSet { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            grid: self.grid,
            values: self.values.column(i).iter().copied().collect(),
        }
    }

    /// Subset of curves in the given order.
    pub fn select(&self, idx: &[usize]) -> CurveSet {
        CurveSet {
            grid: self.grid,
            values: self.values.select_columns(idx),
        }
    }

    fn weighted(&self, q: &QuadratureRule) -> Result<DMatrix<f64>> {
        if q.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut wx = self.values.clone();
        for (i, w) in q.weights.iter().enumerate() {
            wx.row_mut(i).scale_mut(*w);
        }
        Ok(wx)
    }
}

/// `(L_K X_i)(t) = ∫ K(t,s) X_i(s) ds` tabulated on the grid, one column per
/// curve. Both `Σ` and the fitted slope function are built from it.
#[derive(Debug, Clone)]
pub struct KernelSections {
    quadrature: QuadratureRule,
    weighted_curves: DMatrix<f64>,
    sections: DMatrix<f64>,
}

impl KernelSections {
    pub fn new(curves: &CurveSet, k: &dyn Kernel, q: &QuadratureRule) -> Result<Self> {
        let wx = curves.weighted(q)?;
        let pts: Vec<[f64; 1]> = q.grid.points().into_iter().map(|t| [t]).collect();
        let k_grid = gram_matrix(k, &pts)?;
        let sections = &k_grid * &wx;
        Ok(KernelSections {
            quadrature: q.clone(),
            weighted_curves: wx,
            sections,
        })
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    pub fn sections(&self) -> &DMatrix<f64> {
        &self.sections
    }

    /// `Σ = (W X)ᵀ 𝐊 (W X)`, symmetrized.
    pub fn sigma(&self) -> DMatrix<f64> {
        let mut s = self.weighted_curves.transpose() * &self.sections;
        crate::linalg::symmetrize(&mut s);
        s
    }

    /// `β(t) = d₁ + d₂ t + Σ c_i (L_K X_i)(t)` on the grid.
    pub fn slope_function(&self, c: &DVector<f64>, d: Option<&DVector<f64>>) -> Curve {
        let grid = self.quadrature.grid;
        let mut values = &self.sections * c;
        if let Some(d) = d {
            for (i, v) in values.iter_mut().enumerate() {
                *v += d[0] + d[1] * grid.point(i);
            }
        }
        Curve {
            grid,
            values: values.iter().copied().collect(),
        }
    }
}

/// `Σ_ij = ∬ X_i(t) K(t,s) X_j(s) ds dt` by tensor-product quadrature.
pub fn build_sigma(curves: &CurveSet, k: &dyn Kernel, q: &QuadratureRule) -> Result<DMatrix<f64>> {
    Ok(KernelSections::new(curves, k, q)?.sigma())
}

/// `A_im = ∫ X_i(t) t^{m−1} dt`, `m = 1, 2`.
pub fn build_a(curves: &CurveSet, q: &QuadratureRule) -> Result<DMatrix<f64>> {
    let wx = curves.weighted(q)?;
    let grid = curves.grid;
    let n = curves.len();
    let mut a = DMatrix::zeros(n, 2);
    for j in 0..n {
        let col = wx.column(j);
        a[(j, 0)] = col.sum();
        a[(j, 1)] = col.iter().enumerate().map(|(i, v)| v * grid.point(i)).sum();
    }
    Ok(a)
}

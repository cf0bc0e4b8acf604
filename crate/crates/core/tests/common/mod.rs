//! Shared fixtures and independent reference solvers for the integration
//! tests.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semifunc::estimator::{FitConfig, GramSet, Variant};
use semifunc::functional_data::{CosineExpansion, CurveSet, Grid, QuadratureRule};
use semifunc::kernels::{BernoulliSobolev, Gaussian, Kernel};

/// A small random problem assembled from smooth curves.
pub fn random_gram(rng: &mut ChaCha8Rng, n: usize, grid_points: usize, p: usize) -> GramSet {
    random_problem(rng, n, grid_points, p).1
}

/// Like [`random_gram`], also returning the curves.
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    grid_points: usize,
    p: usize,
) -> (CurveSet, GramSet) {
    let grid = Grid::new(grid_points).unwrap();
    let q = QuadratureRule::simpson(grid);
    let terms = n + 2;
    let curves: Vec<_> = (0..n)
        .map(|_| {
            let coeffs = (0..terms)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            CosineExpansion::new(coeffs).unwrap().render(grid)
        })
        .collect();
    let curves = CurveSet::from_curves(&curves).unwrap();
    // Stratified first coordinate keeps the scalar Gram well conditioned.
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let u = rng.random::<f64>();
                    if j == 0 {
                        (i as f64 + 0.25 + 0.5 * u) / n as f64
                    } else {
                        u
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let g_kernel: Arc<dyn Kernel> = if p == 1 {
        Arc::new(BernoulliSobolev)
    } else {
        Arc::new(Gaussian::new(0.5).unwrap())
    };
    let gram = GramSet::assemble(&curves, z, y, &BernoulliSobolev, g_kernel, &q).unwrap();
    (curves, gram)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The joint quadratic `J(θ) = ‖Y − Dθ‖²/n + θᵀPθ` written out block by
/// block, with `θ = (d, c, l, η)` for the semi-norm variant and `(c, η)`
/// for the pure-kernel one.
pub struct Quadratic {
    pub design: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Quadratic {
    pub fn new(gram: &GramSet, cfg: &FitConfig) -> Self {
        let semi = cfg.variant == Variant::SemiNorm;
        let mut blocks: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        if semi {
            blocks.push((gram.a().clone(), DMatrix::zeros(2, 2)));
        }
        blocks.push((gram.sigma().clone(), gram.sigma() * cfg.lambda.powi(2)));
        if semi {
            let t = null_design(gram);
            let k = t.ncols();
            blocks.push((t, DMatrix::zeros(k, k)));
        }
        blocks.push((gram.g().clone(), gram.g() * cfg.xi.powi(2)));
        Self::from_blocks(blocks, gram.y().clone())
    }

    /// `β`-only problem on `Y − g`, with `θ = (d, c)`.
    pub fn oracle_beta(gram: &GramSet, g: &[f64], lambda: f64) -> Self {
        let blocks = vec![
            (gram.a().clone(), DMatrix::zeros(2, 2)),
            (gram.sigma().clone(), gram.sigma() * lambda.powi(2)),
        ];
        Self::from_blocks(blocks, gram.y() - DVector::from_column_slice(g))
    }

    /// `g`-only problem on `Y − f`, with `θ = (l, η)`.
    pub fn oracle_g(gram: &GramSet, f: &[f64], xi: f64) -> Self {
        let t = null_design(gram);
        let k = t.ncols();
        let blocks = vec![
            (t, DMatrix::zeros(k, k)),
            (gram.g().clone(), gram.g() * xi.powi(2)),
        ];
        Self::from_blocks(blocks, gram.y() - DVector::from_column_slice(f))
    }

    pub fn from_blocks(blocks: Vec<(DMatrix<f64>, DMatrix<f64>)>, y: DVector<f64>) -> Self {
        let n = y.len();
        let width: usize = blocks.iter().map(|b| b.0.ncols()).sum();
        let mut design = DMatrix::zeros(n, width);
        let mut penalty = DMatrix::zeros(width, width);
        let mut off = 0;
        for (d, pen) in blocks {
            let w = d.ncols();
            design.view_mut((0, off), (n, w)).copy_from(&d);
            penalty.view_mut((off, off), (w, w)).copy_from(&pen);
            off += w;
        }
        Quadratic { design, penalty, y }
    }

    pub fn n(&self) -> f64 {
        self.y.len() as f64
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        let r = &self.y - &self.design * theta;
        r.norm_squared() / self.n() + theta.dot(&(&self.penalty * theta))
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let h = self.design.transpose() * &self.design / self.n() + &self.penalty;
        (&h + h.transpose()) * 0.5
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        (self.hessian() * theta - self.design.transpose() * &self.y / self.n()) * 2.0
    }

    /// Minimum-norm minimizer via an eigen pseudo-inverse, together with an
    /// orthonormal basis of the directions along which `J` is flat.
    pub fn minimize(&self) -> (DVector<f64>, DMatrix<f64>) {
        let h = self.hessian();
        let b = self.design.transpose() * &self.y / self.n();
        let eig = h.clone().symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let tol = top * 1e-14 * h.nrows() as f64;
        let mut theta = DVector::zeros(h.nrows());
        let mut null_cols = Vec::new();
        for (k, &s) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            if s > tol {
                theta += v * (v.dot(&b) / s);
            } else {
                null_cols.push(v.into_owned());
            }
        }
        let null = if null_cols.is_empty() {
            DMatrix::zeros(h.nrows(), 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        (theta, null)
    }
}

/// `(1, Z)` built from the raw covariates.
pub fn null_design(gram: &GramSet) -> DMatrix<f64> {
    let p = gram.z()[0].len();
    DMatrix::from_fn(gram.n(), p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            gram.z()[i][j - 1]
        }
    })
}

/// Remove the components of `v` lying in the column span of `basis`
/// (orthonormal columns).
pub fn project_out(v: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return v.clone();
    }
    v - basis * (basis.transpose() * v)
}

/// Training Gram set of one simulated replicate at `(υ₁, υ₂) = (1.1, 1.5)`.
pub fn simulated_gram(n: usize, seed: u64) -> GramSet {
    use semifunc::kernels::{KernelRegistry, KernelSpec};
    use semifunc::simulation::{generate_dataset, SimConfig, Truth};
    let grid = Grid::new(201).unwrap();
    let truth = Truth::new(1.5, grid).unwrap();
    let mut cell = SimConfig::new(n, 1.1, 1.5);
    cell.n_star = 10;
    let ds = generate_dataset(&cell, &truth, &mut seeded(seed)).unwrap();
    let reg = KernelRegistry::default();
    let spec = KernelSpec::default();
    GramSet::assemble(
        &ds.train.curves,
        ds.train.z.clone(),
        ds.train.y.clone(),
        reg.build(&spec).unwrap().as_ref(),
        reg.build(&spec).unwrap(),
        truth.quadrature(),
    )
    .unwrap()
}

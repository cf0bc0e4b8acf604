//! Synthetic data, prediction-error metrics and the replicate runner.
//!
//! Curves are `X = Σ_{k≤50} ζ_k U_k φ_k` with `ζ_k = (−1)^{k+1} k^{−υ₁/2}` and
//! `U_k ~ U(−√3, √3)`; the truths are `β⁰ = Σ 4(−1)^{k+1} k^{−2} φ_k` and
//! `g⁰ = Σ 4(−1)^{k+1} k^{−υ₂} φ_k`; `Z ~ U(0, 1)` independently of `X` and
//! `Y = ∫Xβ⁰ + g⁰(Z) + ε` with `ε ~ N(0, σ²)`.
//!
//! Replicate `r` of every cell is drawn from a ChaCha8 stream seeded with
//! `base_seed + r`, so a cell can be reproduced in isolation.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Coefficients, Estimator, EstimatorRegistry, GramSet, Variant, Weighting};
use crate::functional_data::{
    cosine_design, CosineExpansion, Curve, CurveSet, Grid, QuadratureRule,
};
use crate::kernels::{cross_matrix, Kernel, KernelRegistry, KernelSpec};
use crate::model_selection::{
    better, grid_search_with, log_spaced, oracle_beta_search, oracle_g_search, DofMode, GcvRule,
    GcvScore,
};

/// Number of cosine terms in every simulated expansion.
pub const BASIS_TERMS: usize = 50;

pub const DEFAULT_TEST_SIZE: usize = 1000;

fn alternating(scale: f64, exponent: f64) -> Vec<f64> {
    (1..=BASIS_TERMS)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * scale * (k as f64).powf(-exponent)
        })
        .collect()
}

/// `β⁰` with coefficients `4(−1)^{k+1} k^{−2}`.
pub fn make_beta0() -> CosineExpansion {
    CosineExpansion {
        coeffs: alternating(4.0, 2.0),
    }
}

/// `g⁰` with coefficients `4(−1)^{k+1} k^{−υ₂}`.
pub fn make_g0(upsilon2: f64) -> Result<CosineExpansion> {
    if !(upsilon2 > 0.5 && upsilon2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "upsilon2 must exceed 1/2, got {upsilon2}"
        )));
    }
    Ok(CosineExpansion {
        coeffs: alternating(4.0, upsilon2),
    })
}

fn check_upsilon1(upsilon1: f64) -> Result<()> {
    if upsilon1 > 1.0 && upsilon1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "upsilon1 must exceed 1, got {upsilon1}"
        )))
    }
}

/// Draw the coefficients of one random curve.
pub fn sample_curve<R: Rng + ?Sized>(upsilon1: f64, rng: &mut R) -> Result<CosineExpansion> {
    check_upsilon1(upsilon1)?;
    let zeta = alternating(1.0, upsilon1 / 2.0);
    let root3 = 3f64.sqrt();
    let unif = Uniform::new(-root3, root3).expect("valid bounds");
    Ok(CosineExpansion {
        coeffs: zeta.iter().map(|z| z * rng.sample(unif)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Both components estimated jointly with GCV over `(λ, ξ)`.
    BothUnknown,
    /// `g⁰` known; only `β` is estimated.
    OracleG,
    /// `β⁰` known; only `g` is estimated.
    OracleBeta,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::BothUnknown => "both-unknown",
            Scenario::OracleG => "oracle-g",
            Scenario::OracleBeta => "oracle-beta",
        }
    }
}

/// One simulation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub n_star: usize,
    pub reps: usize,
    pub seed: u64,
    pub sigma_eps: f64,
    pub scenario: Scenario,
}

impl SimConfig {
    pub fn new(n: usize, upsilon1: f64, upsilon2: f64) -> Self {
        SimConfig {
            n,
            upsilon1,
            upsilon2,
            n_star: DEFAULT_TEST_SIZE,
            reps: 20,
            seed: 0,
            sigma_eps: 1.0,
            scenario: Scenario::BothUnknown,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.n_star < 1 || self.reps < 1 {
            return Err(Error::InvalidArgument(
                "n_star and reps must be positive".into(),
            ));
        }
        check_upsilon1(self.upsilon1)?;
        if !(self.upsilon2 > 1.0 && self.upsilon2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "upsilon2 must exceed 1, got {}",
                self.upsilon2
            )));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_eps must be finite and nonnegative, got {}",
                self.sigma_eps
            )));
        }
        Ok(())
    }
}

/// Simulated observations together with their noiseless components.
#[derive(Debug, Clone)]
pub struct Sample {
    pub curves: CurveSet,
    /// Cosine coefficients of each curve, one column per observation.
    pub coefficients: DMatrix<f64>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// `∫X_i β⁰`.
    pub functional: Vec<f64>,
    /// `g⁰(Z_i)`.
    pub nonparametric: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Sample,
    pub test: Sample,
}

/// The true model on a fixed grid.
#[derive(Debug, Clone)]
pub struct Truth {
    pub beta0: CosineExpansion,
    pub g0: CosineExpansion,
    beta_curve: Curve,
    quadrature: QuadratureRule,
}

impl Truth {
    pub fn new(upsilon2: f64, grid: Grid) -> Result<Self> {
        Ok(Truth::from_parts(make_beta0(), make_g0(upsilon2)?, grid))
    }

    pub fn from_parts(beta0: CosineExpansion, g0: CosineExpansion, grid: Grid) -> Self {
        Truth {
            beta_curve: beta0.render(grid),
            beta0,
            g0,
            quadrature: QuadratureRule::simpson(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.quadrature.grid()
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    pub fn beta_curve(&self) -> &Curve {
        &self.beta_curve
    }

    /// `∫X_i β⁰` for every curve.
    pub fn functional(&self, curves: &CurveSet) -> Result<Vec<f64>> {
        if curves.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let wb = DVector::from_iterator(
            self.grid().len(),
            self.quadrature
                .weights()
                .iter()
                .zip(self.beta_curve.values())
                .map(|(w, b)| w * b),
        );
        Ok((curves.matrix().transpose() * wb).iter().copied().collect())
    }

    pub fn nonparametric(&self, z: &[Vec<f64>]) -> Vec<f64> {
        z.iter().map(|zi| self.g0.eval(zi[0])).collect()
    }

    /// Assemble a sample from explicit curve coefficients (`terms × count`),
    /// covariates and noise.
    pub fn sample(&self, coefficients: DMatrix<f64>, z: Vec<f64>, noise: &[f64]) -> Result<Sample> {
        let count = coefficients.ncols();
        if z.len() != count || noise.len() != count {
            return Err(Error::DimensionMismatch {
                what: "simulated observations",
                expected: count,
                found: z.len().min(noise.len()),
            });
        }
        let basis = cosine_design(self.grid(), coefficients.nrows());
        let curves = CurveSet::from_matrix(self.grid(), basis * &coefficients)?;
        let z: Vec<Vec<f64>> = z.into_iter().map(|v| vec![v]).collect();
        let functional = self.functional(&curves)?;
        let nonparametric = self.nonparametric(&z);
        let y = functional
            .iter()
            .zip(&nonparametric)
            .zip(noise)
            .map(|((f, g), e)| f + g + e)
            .collect();
        Ok(Sample {
            curves,
            coefficients,
            z,
            y,
            functional,
            nonparametric,
        })
    }
}

fn draw_sample<R: Rng + ?Sized>(
    truth: &Truth,
    count: usize,
    upsilon1: f64,
    sigma_eps: f64,
    rng: &mut R,
) -> Result<Sample> {
    let mut coefficients = DMatrix::zeros(BASIS_TERMS, count);
    let mut z = Vec::with_capacity(count);
    let mut noise = Vec::with_capacity(count);
    for i in 0..count {
        let curve = sample_curve(upsilon1, rng)?;
        coefficients.column_mut(i).copy_from_slice(&curve.coeffs);
        z.push(rng.random::<f64>());
        let e: f64 = rng.sample(StandardNormal);
        noise.push(sigma_eps * e);
    }
    truth.sample(coefficients, z, &noise)
}

/// Training sample of size `n` followed by a test sample of size `n*`, both
/// drawn from `rng` in that order.
pub fn generate_dataset<R: Rng + ?Sized>(
    cfg: &SimConfig,
    truth: &Truth,
    rng: &mut R,
) -> Result<Dataset> {
    cfg.validate()?;
    let train = draw_sample(truth, cfg.n, cfg.upsilon1, cfg.sigma_eps, rng)?;
    let test = draw_sample(truth, cfg.n_star, cfg.upsilon1, cfg.sigma_eps, rng)?;
    Ok(Dataset { train, test })
}

/// `(1/n*) Σ [∫X_i (β̂ − β⁰)]²`.
pub fn pred_error_beta(
    slope: &Curve,
    test: &CurveSet,
    beta0: &Curve,
    q: &QuadratureRule,
) -> Result<f64> {
    let grid = q.grid();
    if slope.grid() != grid || test.grid() != grid || beta0.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let diff = DVector::from_iterator(
        grid.len(),
        q.weights()
            .iter()
            .zip(slope.values().iter().zip(beta0.values()))
            .map(|(w, (a, b))| w * (a - b)),
    );
    let contrast = test.matrix().transpose() * diff;
    Ok(contrast.norm_squared() / test.len() as f64)
}

/// `(1/n*) Σ [ĝ(Z_i) − g⁰(Z_i)]²`.
pub fn pred_error_g(g_hat: &[f64], g_true: &[f64]) -> Result<f64> {
    if g_hat.len() != g_true.len() {
        return Err(Error::DimensionMismatch {
            what: "test predictions",
            expected: g_true.len(),
            found: g_hat.len(),
        });
    }
    if g_hat.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    Ok(mean_sq_diff(g_hat.iter().copied(), g_true))
}

fn mean_sq_diff(a: impl Iterator<Item = f64>, b: &[f64]) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / b.len() as f64
}

/// Test-set evaluation matrices, so that both prediction errors of any fit
/// on the same training data cost two matrix–vector products.
pub struct TestDesign {
    sigma_cross: DMatrix<f64>,
    a_test: DMatrix<f64>,
    g_cross: DMatrix<f64>,
    null_test: DMatrix<f64>,
    functional_true: Vec<f64>,
    g_true: Vec<f64>,
}

impl TestDesign {
    pub fn new(gram: &GramSet, test: &Sample) -> Result<Self> {
        let sections = gram
            .sections()
            .ok_or_else(|| Error::InvalidArgument("test evaluation needs curve sections".into()))?;
        let g_kernel = gram.g_kernel().ok_or_else(|| {
            Error::InvalidArgument("test evaluation needs the scalar kernel".into())
        })?;
        let q = sections.quadrature();
        if test.curves.grid() != q.grid() {
            return Err(Error::GridMismatch);
        }
        let w = DVector::from_column_slice(q.weights());
        let mut wx = test.curves.matrix().clone();
        for mut col in wx.column_iter_mut() {
            col.component_mul_assign(&w);
        }
        let sigma_cross = wx.transpose() * sections.sections();
        let a_test = crate::functional_data::build_a(&test.curves, q)?;
        let g_cross = cross_matrix(g_kernel.as_ref(), &test.z, gram.z())?;
        let null_test = DMatrix::from_fn(test.z.len(), test.z[0].len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                test.z[i][j - 1]
            }
        });
        Ok(TestDesign {
            sigma_cross,
            a_test,
            g_cross,
            null_test,
            functional_true: test.functional.clone(),
            g_true: test.nonparametric.clone(),
        })
    }

    fn functional_prediction(&self, c: &DVector<f64>, d: Option<&DVector<f64>>) -> DVector<f64> {
        let mut pred = &self.sigma_cross * c;
        if let Some(d) = d {
            pred += &self.a_test * d;
        }
        pred
    }

    fn nonparametric_prediction(
        &self,
        eta: &DVector<f64>,
        l: Option<&DVector<f64>>,
    ) -> DVector<f64> {
        let mut pred = &self.g_cross * eta;
        if let Some(l) = l {
            pred += &self.null_test * l;
        }
        pred
    }

    pub fn beta_error(&self, c: &DVector<f64>, d: Option<&DVector<f64>>) -> f64 {
        mean_sq_diff(
            self.functional_prediction(c, d).iter().copied(),
            &self.functional_true,
        )
    }

    pub fn g_error(&self, eta: &DVector<f64>, l: Option<&DVector<f64>>) -> f64 {
        mean_sq_diff(
            self.nonparametric_prediction(eta, l).iter().copied(),
            &self.g_true,
        )
    }

    /// `(‖β̂ − β⁰‖², ‖ĝ − g⁰‖², ‖f̂ − f⁰‖²)` on the test set, where
    /// `f = ∫Xβ + g(Z)` is the regression function.
    pub fn errors(&self, coefs: &Coefficients) -> (f64, f64, f64) {
        let fb = self.functional_prediction(&coefs.c, coefs.d.as_ref());
        let fg = self.nonparametric_prediction(&coefs.eta, coefs.l.as_ref());
        let k = self.g_true.len() as f64;
        let (mut eb, mut eg, mut ef) = (0.0, 0.0, 0.0);
        for i in 0..self.g_true.len() {
            let db = fb[i] - self.functional_true[i];
            let dg = fg[i] - self.g_true[i];
            eb += db * db;
            eg += dg * dg;
            ef += (db + dg) * (db + dg);
        }
        (eb / k, eg / k, ef / k)
    }
}

/// A penalty grid: explicit `values`, or `count` log-spaced points in
/// `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub values: Option<Vec<f64>>,
}

impl Default for PenaltyGrid {
    fn default() -> Self {
        PenaltyGrid {
            min: 1e-6,
            max: 1.0,
            count: 20,
            values: None,
        }
    }
}

impl PenaltyGrid {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match &self.values {
            Some(v) if v.is_empty() => Err(Error::Config("penalty grid `values` is empty".into())),
            Some(v) => Ok(v.clone()),
            None => log_spaced(self.min, self.max, self.count),
        }
    }
}

/// How penalties are tuned inside each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    pub variant: Variant,
    pub weighting: Weighting,
    pub dof_mode: DofMode,
    /// GCV degrees-of-freedom multiplier `γ ≥ 1`.
    pub dof_inflation: f64,
    pub lambda: PenaltyGrid,
    pub xi: PenaltyGrid,
    /// Also record the smallest test errors attained anywhere on the grid.
    pub track_grid_minimum: bool,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            variant: Variant::SemiNorm,
            weighting: Weighting::Exact,
            dof_mode: DofMode::Effective,
            dof_inflation: 1.4,
            lambda: PenaltyGrid::default(),
            xi: PenaltyGrid::default(),
            track_grid_minimum: false,
        }
    }
}

impl TuningConfig {
    pub fn rule(&self) -> GcvRule {
        GcvRule::new(self.dof_mode).inflated(self.dof_inflation)
    }
}

/// A sweep over `n × υ₁ × υ₂` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub sample_sizes: Vec<usize>,
    pub upsilon1: Vec<f64>,
    pub upsilon2: Vec<f64>,
    pub n_star: usize,
    pub reps: usize,
    pub seed: u64,
    pub sigma_eps: f64,
    pub grid_points: usize,
    pub functional_kernel: KernelSpec,
    pub nonparametric_kernel: KernelSpec,
    pub tuning: TuningConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::BothUnknown,
            sample_sizes: vec![50, 100, 200, 500],
            upsilon1: vec![1.1, 1.5, 2.0, 4.0],
            upsilon2: vec![1.5],
            n_star: DEFAULT_TEST_SIZE,
            reps: 20,
            seed: 1,
            sigma_eps: 1.0,
            grid_points: crate::functional_data::DEFAULT_GRID_POINTS,
            functional_kernel: KernelSpec::default(),
            nonparametric_kernel: KernelSpec::default(),
            tuning: TuningConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// All cells in sweep order (`n` outermost, then `υ₁`, then `υ₂`).
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &n in &self.sample_sizes {
            for &u1 in &self.upsilon1 {
                for &u2 in &self.upsilon2 {
                    out.push(SimConfig {
                        n,
                        upsilon1: u1,
                        upsilon2: u2,
                        n_star: self.n_star,
                        reps: self.reps,
                        seed: self.seed,
                        sigma_eps: self.sigma_eps,
                        scenario: self.scenario,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (what, empty) in [
            ("sample_sizes", self.sample_sizes.is_empty()),
            ("upsilon1", self.upsilon1.is_empty()),
            ("upsilon2", self.upsilon2.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("`{what}` must not be empty")));
            }
        }
        let mut sizes = self.sample_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.len() != self.sample_sizes.len() {
            return Err(Error::Config("`sample_sizes` contains duplicates".into()));
        }
        if self.seed.checked_add(self.reps as u64).is_none() {
            return Err(Error::Config("seed + reps overflows".into()));
        }
        Grid::new(self.grid_points)?;
        for cell in self.cells() {
            cell.validate()?;
        }
        self.tuning.lambda.resolve()?;
        self.tuning.xi.resolve()?;
        self.tuning.rule().validate()?;
        let kernels = KernelRegistry::default();
        kernels.build(&self.functional_kernel)?;
        kernels.build(&self.nonparametric_kernel)?;
        ScenarioRegistry::default().get(self.scenario.name())?;
        Ok(())
    }
}

/// Everything a scenario strategy may use for one replicate.
pub struct ReplicateContext<'a> {
    pub gram: &'a GramSet,
    pub dataset: &'a Dataset,
    pub test: &'a TestDesign,
    pub estimator: &'a dyn Estimator,
    pub tuning: &'a TuningConfig,
    pub lambda_values: &'a [f64],
    pub xi_values: &'a [f64],
}

/// Numbers produced by one replicate. Errors of a component that the
/// scenario treats as known are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub beta_error: Option<f64>,
    pub g_error: Option<f64>,
    /// `‖f̂ − f⁰‖²` of the whole regression function, when both parts are estimated.
    pub total_error: Option<f64>,
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    pub gcv: Option<f64>,
    pub grid_min_beta_error: Option<f64>,
    pub grid_min_g_error: Option<f64>,
    pub grid_min_total_error: Option<f64>,
}

/// A simulation scenario selectable by name.
pub trait ScenarioStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, ctx: &ReplicateContext<'_>) -> Result<ReplicateOutcome>;
}

pub struct BothUnknownStrategy;

impl ScenarioStrategy for BothUnknownStrategy {
    fn name(&self) -> &'static str {
        Scenario::BothUnknown.name()
    }

    fn run(&self, ctx: &ReplicateContext<'_>) -> Result<ReplicateOutcome> {
        let (nl, nx) = (ctx.lambda_values.len(), ctx.xi_values.len());
        let mut surface: Option<[DMatrix<f64>; 3]> = ctx
            .tuning
            .track_grid_minimum
            .then(|| std::array::from_fn(|_| DMatrix::from_element(nl, nx, f64::NAN)));
        let n = ctx.gram.n();
        let mut best: Option<(f64, f64, f64, Coefficients)> = None;
        let grid = grid_search_with(
            ctx.gram,
            ctx.estimator,
            ctx.lambda_values,
            ctx.xi_values,
            ctx.tuning.rule(),
            ctx.tuning.weighting,
            |i, j, point| {
                let coefs = point.fit.coefficients();
                if let Some(m) = surface.as_mut() {
                    let (eb, eg, ef) = ctx.test.errors(&coefs);
                    m[0][(i, j)] = eb;
                    m[1][(i, j)] = eg;
                    m[2][(i, j)] = ef;
                }
                let score = GcvScore::from_point(point, n, ctx.tuning.rule()).score;
                let (lam, xi) = (ctx.lambda_values[i], ctx.xi_values[j]);
                if better(score, lam, xi, best.as_ref().map(|b| (b.0, b.1, b.2))) {
                    best = Some((score, lam, xi, coefs));
                }
                Ok(())
            },
        )?;
        let coefs = best.ok_or(Error::AllPairsFailed)?.3;
        let (eb, eg, ef) = ctx.test.errors(&coefs);
        let min_finite = |m: &DMatrix<f64>| {
            m.iter()
                .copied()
                .filter(|v| v.is_finite())
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                })
        };
        Ok(ReplicateOutcome {
            beta_error: Some(eb),
            g_error: Some(eg),
            total_error: Some(ef),
            lambda: Some(grid.best_lambda()),
            xi: Some(grid.best_xi()),
            gcv: Some(grid.best_score()),
            grid_min_beta_error: surface.as_ref().and_then(|m| min_finite(&m[0])),
            grid_min_g_error: surface.as_ref().and_then(|m| min_finite(&m[1])),
            grid_min_total_error: surface.as_ref().and_then(|m| min_finite(&m[2])),
        })
    }
}

pub struct OracleGStrategy;

impl ScenarioStrategy for OracleGStrategy {
    fn name(&self) -> &'static str {
        Scenario::OracleG.name()
    }

    fn run(&self, ctx: &ReplicateContext<'_>) -> Result<ReplicateOutcome> {
        let search = oracle_beta_search(
            ctx.gram,
            &ctx.dataset.train.nonparametric,
            ctx.lambda_values,
            ctx.tuning.dof_inflation,
        )?;
        Ok(ReplicateOutcome {
            beta_error: Some(ctx.test.beta_error(&search.fit.c, Some(&search.fit.d))),
            lambda: Some(search.values[search.best]),
            gcv: Some(search.scores[search.best]),
            ..Default::default()
        })
    }
}

pub struct OracleBetaStrategy;

impl ScenarioStrategy for OracleBetaStrategy {
    fn name(&self) -> &'static str {
        Scenario::OracleBeta.name()
    }

    fn run(&self, ctx: &ReplicateContext<'_>) -> Result<ReplicateOutcome> {
        let search = oracle_g_search(
            ctx.gram,
            &ctx.dataset.train.functional,
            ctx.xi_values,
            ctx.tuning.dof_inflation,
        )?;
        Ok(ReplicateOutcome {
            g_error: Some(ctx.test.g_error(&search.fit.eta, Some(&search.fit.l))),
            xi: Some(search.values[search.best]),
            gcv: Some(search.scores[search.best]),
            ..Default::default()
        })
    }
}

type ScenarioFactory = fn() -> Box<dyn ScenarioStrategy>;

/// Name → scenario table.
pub struct ScenarioRegistry {
    factories: BTreeMap<&'static str, ScenarioFactory>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        ScenarioRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: ScenarioFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Box<dyn ScenarioStrategy>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "scenario",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        let mut r = ScenarioRegistry::empty();
        r.register("both-unknown", || Box::new(BothUnknownStrategy));
        r.register("oracle-g", || Box::new(OracleGStrategy));
        r.register("oracle-beta", || Box::new(OracleBetaStrategy));
        r
    }
}

/// One replicate of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub scenario: Scenario,
    pub n: usize,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub replicate: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: ReplicateOutcome,
    /// Failure message; the numeric fields are empty when present.
    pub failure: Option<String>,
}

/// Aggregate over the replicates of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub reps: usize,
    pub failures: usize,
    pub beta_error_mean: Option<f64>,
    pub beta_error_sd: Option<f64>,
    pub g_error_mean: Option<f64>,
    pub g_error_sd: Option<f64>,
    pub total_error_mean: Option<f64>,
    /// Geometric mean of the selected `λ`.
    pub lambda_geomean: Option<f64>,
    pub xi_geomean: Option<f64>,
    pub grid_min_beta_error_mean: Option<f64>,
    pub grid_min_g_error_mean: Option<f64>,
    pub grid_min_total_error_mean: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Beta,
    G,
}

/// Log–log slope of mean error against `n` for one smoothness pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub component: Component,
    pub slope: f64,
    pub std_err: f64,
    pub sample_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub cells: Vec<CellSummary>,
    pub slopes: Vec<RateSlope>,
}

impl ScenarioReport {
    pub fn cell(&self, n: usize, upsilon1: f64, upsilon2: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.upsilon1 == upsilon1 && c.upsilon2 == upsilon2)
    }
}

/// Least-squares line through `(log n, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `0` when the fit is exact or has no
    /// residual degrees of freedom.
    pub std_err: f64,
}

pub fn fit_rate(errors: &[f64], ns: &[usize]) -> Result<RateFit> {
    if errors.len() != ns.len() {
        return Err(Error::DimensionMismatch {
            what: "rate-slope inputs",
            expected: ns.len(),
            found: errors.len(),
        });
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "rate slopes need positive finite errors, got {e}"
        )));
    }
    let mut distinct = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 || distinct[0] == 0 {
        return Err(Error::InvalidArgument(
            "rate slopes need at least three distinct positive sample sizes".into(),
        ));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let std_err = if x.len() > 2 {
        (sse / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        std_err,
    })
}

/// Slope of `log(error)` on `log(n)`.
pub fn estimate_rate_slope(errors: &[f64], ns: &[usize]) -> Result<f64> {
    fit_rate(errors, ns).map(|f| f.slope)
}

struct Shared {
    truths: BTreeMap<u64, Truth>,
    k: Arc<dyn Kernel>,
    g_kernel: Arc<dyn Kernel>,
    estimator: Box<dyn Estimator>,
    strategy: Box<dyn ScenarioStrategy>,
    lambda_values: Vec<f64>,
    xi_values: Vec<f64>,
}

/// Run one replicate of `cell`.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    cell: &SimConfig,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    cfg.validate()?;
    let shared = Shared::new(cfg, &ScenarioRegistry::default())?;
    shared.replicate(cfg, cell, replicate)
}

impl Shared {
    fn new(cfg: &ExperimentConfig, scenarios: &ScenarioRegistry) -> Result<Self> {
        let grid = Grid::new(cfg.grid_points)?;
        let mut truths = BTreeMap::new();
        for &u2 in &cfg.upsilon2 {
            truths.insert(u2.to_bits(), Truth::new(u2, grid)?);
        }
        let kernels = KernelRegistry::default();
        Ok(Shared {
            truths,
            k: kernels.build(&cfg.functional_kernel)?,
            g_kernel: kernels.build(&cfg.nonparametric_kernel)?,
            estimator: EstimatorRegistry::default().for_variant(cfg.tuning.variant)?,
            strategy: scenarios.get(cfg.scenario.name())?,
            lambda_values: cfg.tuning.lambda.resolve()?,
            xi_values: cfg.tuning.xi.resolve()?,
        })
    }

    fn replicate(
        &self,
        cfg: &ExperimentConfig,
        cell: &SimConfig,
        r: usize,
    ) -> Result<ReplicateOutcome> {
        let truth = self
            .truths
            .get(&cell.upsilon2.to_bits())
            .ok_or_else(|| Error::Config(format!("no truth for upsilon2 = {}", cell.upsilon2)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cell.seed + r as u64);
        let dataset = generate_dataset(cell, truth, &mut rng)?;
        let gram = GramSet::assemble(
            &dataset.train.curves,
            dataset.train.z.clone(),
            dataset.train.y.clone(),
            self.k.as_ref(),
            self.g_kernel.clone(),
            truth.quadrature(),
        )?;
        let test = TestDesign::new(&gram, &dataset.test)?;
        let ctx = ReplicateContext {
            gram: &gram,
            dataset: &dataset,
            test: &test,
            estimator: self.estimator.as_ref(),
            tuning: &cfg.tuning,
            lambda_values: &self.lambda_values,
            xi_values: &self.xi_values,
        };
        self.strategy.run(&ctx)
    }
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sd = if values.len() > 1 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt())
    } else {
        Some(0.0)
    };
    (Some(mean), sd)
}

fn geomean(values: &[f64]) -> Option<f64> {
    (!values.is_empty())
        .then(|| (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

fn summarize(cell: &SimConfig, records: &[ReplicateRecord]) -> CellSummary {
    let pick = |f: fn(&ReplicateOutcome) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(|r| f(&r.outcome)).collect()
    };
    let (beta_error_mean, beta_error_sd) = mean_sd(&pick(|o| o.beta_error));
    let (g_error_mean, g_error_sd) = mean_sd(&pick(|o| o.g_error));
    CellSummary {
        scenario: cell.scenario,
        n: cell.n,
        upsilon1: cell.upsilon1,
        upsilon2: cell.upsilon2,
        reps: records.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        beta_error_mean,
        beta_error_sd,
        g_error_mean,
        g_error_sd,
        total_error_mean: mean_sd(&pick(|o| o.total_error)).0,
        lambda_geomean: geomean(&pick(|o| o.lambda)),
        xi_geomean: geomean(&pick(|o| o.xi)),
        grid_min_beta_error_mean: mean_sd(&pick(|o| o.grid_min_beta_error)).0,
        grid_min_g_error_mean: mean_sd(&pick(|o| o.grid_min_g_error)).0,
        grid_min_total_error_mean: mean_sd(&pick(|o| o.grid_min_total_error)).0,
    }
}

fn rate_slopes(cfg: &ExperimentConfig, cells: &[CellSummary]) -> Vec<RateSlope> {
    let mut out = Vec::new();
    for &u1 in &cfg.upsilon1 {
        for &u2 in &cfg.upsilon2 {
            for component in [Component::Beta, Component::G] {
                let mut ns = Vec::new();
                let mut errs = Vec::new();
                for c in cells
                    .iter()
                    .filter(|c| c.upsilon1 == u1 && c.upsilon2 == u2)
                {
                    let e = match component {
                        Component::Beta => c.beta_error_mean,
                        Component::G => c.g_error_mean,
                    };
                    if let Some(e) = e {
                        ns.push(c.n);
                        errs.push(e);
                    }
                }
                if let Ok(fit) = fit_rate(&errs, &ns) {
                    out.push(RateSlope {
                        upsilon1: u1,
                        upsilon2: u2,
                        component,
                        slope: fit.slope,
                        std_err: fit.std_err,
                        sample_sizes: ns,
                    });
                }
            }
        }
    }
    out
}

/// Run every replicate of every cell on the current rayon pool. Failed
/// replicates are recorded, never propagated.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioReport> {
    run_scenario_with(cfg, &ScenarioRegistry::default())
}

/// [`run_scenario`] with the scenario looked up in `scenarios`.
pub fn run_scenario_with(
    cfg: &ExperimentConfig,
    scenarios: &ScenarioRegistry,
) -> Result<ScenarioReport> {
    cfg.validate()?;
    let shared = Shared::new(cfg, scenarios)?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let records: Vec<ReplicateRecord> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            let result = shared.replicate(cfg, cell, r);
            let (outcome, failure) = match result {
                Ok(o) => (o, None),
                Err(e) => (ReplicateOutcome::default(), Some(e.to_string())),
            };
            ReplicateRecord {
                scenario: cell.scenario,
                n: cell.n,
                upsilon1: cell.upsilon1,
                upsilon2: cell.upsilon2,
                replicate: r,
                seed: cell.seed + r as u64,
                outcome,
                failure,
            }
        })
        .collect();
    let summaries: Vec<CellSummary> = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| summarize(cell, &records[c * cfg.reps..(c + 1) * cfg.reps]))
        .collect();
    let slopes = rate_slopes(cfg, &summaries);
    Ok(ScenarioReport {
        config: cfg.clone(),
        records,
        cells: summaries,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta0_coefficients() {
        let b = make_beta0().coeffs;
        assert_eq!(b.len(), BASIS_TERMS);
        assert_eq!(b[0], 4.0);
        assert_eq!(b[1], -1.0);
        assert!((b[2] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn g0_examples() {
        assert_eq!(make_g0(2.0).unwrap(), make_beta0());
        let hi = make_g0(4.0).unwrap().coeffs;
        let lo = make_g0(1.5).unwrap().coeffs;
        assert!(hi.iter().zip(&lo).all(|(a, b)| a.abs() <= b.abs()));
        assert_eq!(make_g0(1.7).unwrap().coeffs[0], 4.0);
        assert!(make_g0(0.5).is_err());
    }

    #[test]
    fn exact_power_law_slope() {
        let ns = [50, 100, 200, 500];
        let e: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.8)).collect();
        let f = fit_rate(&e, &ns).unwrap();
        assert!((f.slope + 0.8).abs() < 1e-10);
        assert!(f.std_err < 1e-8);
        assert_eq!(estimate_rate_slope(&[2.0; 3], &[1, 2, 3]).unwrap(), 0.0);
        assert!(estimate_rate_slope(&[1.0, 0.0, 1.0], &[1, 2, 3]).is_err());
        assert!(estimate_rate_slope(&[1.0, 2.0, 1.0], &[1, 2, 2]).is_err());
    }

    #[test]
    fn mean_and_sd() {
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[]), (None, None));
    }
}

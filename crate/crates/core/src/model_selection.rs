//! GCV scoring and exhaustive `(λ, ξ)` grid search.
//!
//! `GCV(λ, ξ) = ‖Ŷ − Y‖²_n / (1 − tr(H_λ)/n)²`. The default denominator uses
//! the functional smoother `H_λ` only; [`DofMode::Effective`] swaps in the
//! trace of the full response-to-fit map, which also counts the degrees of
//! freedom spent on `ĝ`. A [`GcvRule`] may inflate the degrees of freedom by a
//! factor `γ ≥ 1`, which guards against near-interpolating fits at small `n`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    oracle_fit_beta, oracle_fit_g, BetaOracleFit, Estimator, FitConfig, GOracleFit, GramSet,
    ProfilePoint, Weighting,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofMode {
    /// `tr(H_λ)` of the functional smoother.
    #[default]
    SmootherTrace,
    /// Trace of the full map `Y ↦ Ŷ`.
    Effective,
}

/// `rss / (1 − dof/n)²`, or `+∞` when `dof ≥ n`.
pub fn gcv_ratio(rss: f64, dof: f64, n: usize) -> f64 {
    let denom = 1.0 - dof / n as f64;
    if !(denom > 0.0) || !rss.is_finite() {
        return f64::INFINITY;
    }
    rss / (denom * denom)
}

/// Which degrees of freedom enter the denominator, and by how much they are
/// inflated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvRule {
    pub dof: DofMode,
    pub inflation: f64,
}

impl GcvRule {
    pub fn new(dof: DofMode) -> Self {
        GcvRule {
            dof,
            inflation: 1.0,
        }
    }

    pub fn inflated(self, inflation: f64) -> Self {
        GcvRule { inflation, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inflation.is_finite() && self.inflation >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dof inflation must be finite and >= 1, got {}",
                self.inflation
            )));
        }
        Ok(())
    }
}

impl Default for GcvRule {
    fn default() -> Self {
        GcvRule::new(DofMode::default())
    }
}

impl From<DofMode> for GcvRule {
    fn from(dof: DofMode) -> Self {
        GcvRule::new(dof)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvScore {
    pub score: f64,
    pub rss: f64,
    pub trace_h: f64,
    pub effective_dof: f64,
}

impl GcvScore {
    pub fn from_point(point: &ProfilePoint, n: usize, rule: GcvRule) -> Self {
        let dof = match rule.dof {
            DofMode::SmootherTrace => point.trace_h,
            DofMode::Effective => point.effective_dof,
        };
        GcvScore {
            score: gcv_ratio(point.rss, rule.inflation * dof, n),
            rss: point.rss,
            trace_h: point.trace_h,
            effective_dof: point.effective_dof,
        }
    }
}

/// GCV at a single `(λ, ξ)`.
pub fn gcv_score(
    gram: &GramSet,
    estimator: &dyn Estimator,
    cfg: &FitConfig,
    rule: GcvRule,
) -> Result<GcvScore> {
    cfg.validate()?;
    rule.validate()?;
    let point = estimator
        .profile(gram, cfg.lambda, cfg.weighting)?
        .at(cfg.xi)?;
    Ok(GcvScore::from_point(&point, gram.n(), rule))
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad log grid [{lo}, {hi}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// 20 log-spaced values in `[1e−6, 1]`.
pub fn default_penalty_grid() -> Vec<f64> {
    log_spaced(1e-6, 1.0, 20).expect("static grid")
}

/// Full GCV surface over a `(λ, ξ)` grid.
#[derive(Debug, Clone)]
pub struct GcvGrid {
    pub lambda_values: Vec<f64>,
    pub xi_values: Vec<f64>,
    pub rule: GcvRule,
    /// `scores[(i, j)]` for `lambda_values[i]`, `xi_values[j]`; NaN where the fit failed.
    pub scores: DMatrix<f64>,
    pub traces: DMatrix<f64>,
    pub effective_dof: DMatrix<f64>,
    pub best: (usize, usize),
}

impl GcvGrid {
    pub fn best_lambda(&self) -> f64 {
        self.lambda_values[self.best.0]
    }

    pub fn best_xi(&self) -> f64 {
        self.xi_values[self.best.1]
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best]
    }
}

fn validate_grid(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    for v in values {
        crate::estimator::check_penalty(name, *v)?;
    }
    Ok(())
}

/// Tie-break: lower score wins; equal scores prefer the larger `λ`, then the
/// larger `ξ`.
pub(crate) fn better(score: f64, lam: f64, xi: f64, best: Option<(f64, f64, f64)>) -> bool {
    if !score.is_finite() {
        return false;
    }
    match best {
        None => true,
        Some((bs, bl, bx)) => score < bs || (score == bs && (lam > bl || (lam == bl && xi > bx))),
    }
}

/// Exhaustive grid search. `visit` sees every successful fit in row-major
/// order, which lets callers evaluate extra per-pair quantities without
/// refitting.
pub fn grid_search_with<F>(
    gram: &GramSet,
    estimator: &dyn Estimator,
    lambda_values: &[f64],
    xi_values: &[f64],
    rule: GcvRule,
    weighting: Weighting,
    mut visit: F,
) -> Result<GcvGrid>
where
    F: FnMut(usize, usize, &ProfilePoint) -> Result<()>,
{
    validate_grid("lambda", lambda_values)?;
    validate_grid("xi", xi_values)?;
    rule.validate()?;
    let (nl, nx) = (lambda_values.len(), xi_values.len());
    let mut scores = DMatrix::from_element(nl, nx, f64::NAN);
    let mut traces = DMatrix::from_element(nl, nx, f64::NAN);
    let mut dofs = DMatrix::from_element(nl, nx, f64::NAN);
    let mut best: Option<(f64, f64, f64)> = None;
    let mut best_idx = None;
    for (i, &lam) in lambda_values.iter().enumerate() {
        let profile = match estimator.profile(gram, lam, weighting) {
            Ok(p) => p,
            Err(e) if e.is_numerical() => continue,
            Err(e) => return Err(e),
        };
        for (j, &xi) in xi_values.iter().enumerate() {
            let point = match profile.at(xi) {
                Ok(p) => p,
                Err(e) if e.is_numerical() => continue,
                Err(e) => return Err(e),
            };
            let s = GcvScore::from_point(&point, gram.n(), rule);
            scores[(i, j)] = s.score;
            traces[(i, j)] = s.trace_h;
            dofs[(i, j)] = s.effective_dof;
            visit(i, j, &point)?;
            if better(s.score, lam, xi, best) {
                best = Some((s.score, lam, xi));
                best_idx = Some((i, j));
            }
        }
    }
    let best = best_idx.ok_or(Error::AllPairsFailed)?;
    Ok(GcvGrid {
        lambda_values: lambda_values.to_vec(),
        xi_values: xi_values.to_vec(),
        rule,
        scores,
        traces,
        effective_dof: dofs,
        best,
    })
}

pub fn grid_search(
    gram: &GramSet,
    estimator: &dyn Estimator,
    lambda_values: &[f64],
    xi_values: &[f64],
    rule: GcvRule,
    weighting: Weighting,
) -> Result<GcvGrid> {
    grid_search_with(
        gram,
        estimator,
        lambda_values,
        xi_values,
        rule,
        weighting,
        |_, _, _| Ok(()),
    )
}

/// One-dimensional GCV search for a single-penalty oracle fit.
#[derive(Debug, Clone)]
pub struct OracleSearch<F> {
    pub values: Vec<f64>,
    pub scores: Vec<f64>,
    pub best: usize,
    pub fit: F,
}

fn search_1d<F: Clone>(
    values: &[f64],
    name: &str,
    n: usize,
    inflation: f64,
    mut fit: impl FnMut(f64) -> Result<(F, f64, f64)>,
) -> Result<OracleSearch<F>> {
    validate_grid(name, values)?;
    GcvRule::new(DofMode::SmootherTrace)
        .inflated(inflation)
        .validate()?;
    let mut scores = vec![f64::NAN; values.len()];
    let mut best: Option<(usize, f64, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        let (f, rss, trace) = match fit(v) {
            Ok(r) => r,
            Err(e) if e.is_numerical() => continue,
            Err(e) => return Err(e),
        };
        let s = gcv_ratio(rss, inflation * trace, n);
        scores[i] = s;
        let wins = s.is_finite()
            && match &best {
                None => true,
                Some((bi, bs, _)) => s < *bs || (s == *bs && v > values[*bi]),
            };
        if wins {
            best = Some((i, s, f));
        }
    }
    let (best, _, fit) = best.ok_or(Error::AllPairsFailed)?;
    Ok(OracleSearch {
        values: values.to_vec(),
        scores,
        best,
        fit,
    })
}

/// GCV over `λ` for the `g`-known oracle.
pub fn oracle_beta_search(
    gram: &GramSet,
    g_true: &[f64],
    lambda_values: &[f64],
    inflation: f64,
) -> Result<OracleSearch<BetaOracleFit>> {
    search_1d(lambda_values, "lambda", gram.n(), inflation, |lam| {
        let f = oracle_fit_beta(gram, g_true, lam)?;
        let (rss, tr) = (f.rss, f.trace_h);
        Ok((f, rss, tr))
    })
}

/// GCV over `ξ` for the `β`-known oracle.
pub fn oracle_g_search(
    gram: &GramSet,
    functional_true: &[f64],
    xi_values: &[f64],
    inflation: f64,
) -> Result<OracleSearch<GOracleFit>> {
    search_1d(xi_values, "xi", gram.n(), inflation, |xi| {
        let f = oracle_fit_g(gram, functional_true, xi)?;
        let (rss, tr) = (f.rss, f.trace_h);
        Ok((f, rss, tr))
    })
}

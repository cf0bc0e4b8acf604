//! Single-component estimators used when the other component is known.
//!
//! With `g⁰` known the functional part is fit to `Y − g⁰(Z)` with the
//! semi-norm penalty on `β` only; with `β⁰` known the nonparametric part is
//! a penalized smoother of `Y − ∫Xβ⁰` with null space `{1, z}`.

use nalgebra::{DMatrix, DVector};

use super::stage::PenalizedStage;
use super::{check_penalty, GramSet, Predictor, Variant};
use crate::error::{Error, Result};
use crate::functional_data::Curve;

#[derive(Debug, Clone, PartialEq)]
pub struct BetaOracleFit {
    pub d: DVector<f64>,
    pub c: DVector<f64>,
    pub fitted: DVector<f64>,
    pub lambda: f64,
    /// `‖Ŷ − Y^β‖²_n`.
    pub rss: f64,
    pub trace_h: f64,
}

impl BetaOracleFit {
    /// `β̂` tabulated on the training grid.
    pub fn slope(&self, gram: &GramSet) -> Result<Curve> {
        let zero = DVector::zeros(gram.n());
        Ok(Predictor::new(gram, &self.c, Some(&self.d), &zero, None)?
            .slope()
            .clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GOracleFit {
    pub l: DVector<f64>,
    pub eta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub xi: f64,
    /// `‖Ŷ − Y^g‖²_n`.
    pub rss: f64,
    pub trace_h: f64,
}

impl GOracleFit {
    pub fn nonparametric_many(&self, gram: &GramSet, z: &[Vec<f64>]) -> Result<Vec<f64>> {
        let zero = DVector::zeros(gram.n());
        Predictor::new(gram, &zero, None, &self.eta, Some(&self.l))?.nonparametric_many(z)
    }
}

fn offset_response(gram: &GramSet, known: &[f64], what: &'static str) -> Result<DVector<f64>> {
    if known.len() != gram.n() {
        return Err(Error::DimensionMismatch {
            what,
            expected: gram.n(),
            found: known.len(),
        });
    }
    if !known.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(gram.y() - DVector::from_column_slice(known))
}

/// Fit `β` alone to `Y − g⁰(Z)`.
pub fn oracle_fit_beta(gram: &GramSet, g_true: &[f64], lambda: f64) -> Result<BetaOracleFit> {
    check_penalty("lambda", lambda)?;
    gram.check_variant(Variant::SemiNorm)?;
    let yb = offset_response(gram, g_true, "known g values")?;
    let n = gram.n() as f64;
    let stage = PenalizedStage::new(gram.sigma(), Some(gram.a()), n * lambda * lambda)?;
    let sol = stage.solve(&yb);
    let d = sol
        .null
        .ok_or_else(|| Error::Singular("missing null-space block".into()))?;
    let fitted = gram.a() * &d + gram.sigma() * &sol.coef;
    Ok(BetaOracleFit {
        rss: (&yb - &fitted).norm_squared() / n,
        trace_h: n - stage.residual_operator().trace(),
        d,
        c: sol.coef,
        fitted,
        lambda,
    })
}

/// Fit `g` alone to `Y − ∫Xβ⁰`.
pub fn oracle_fit_g(gram: &GramSet, functional_true: &[f64], xi: f64) -> Result<GOracleFit> {
    check_penalty("xi", xi)?;
    let yg = offset_response(gram, functional_true, "known functional values")?;
    let n = gram.n() as f64;
    let t = gram.scalar_null_design();
    let stage = PenalizedStage::new(gram.g(), Some(&t), n * xi * xi)?;
    let sol = stage.solve(&yg);
    let l = sol
        .null
        .ok_or_else(|| Error::Singular("missing null-space block".into()))?;
    let fitted = &t * &l + gram.g() * &sol.coef;
    Ok(GOracleFit {
        rss: (&yg - &fitted).norm_squared() / n,
        trace_h: n - stage.residual_operator().trace(),
        l,
        eta: sol.coef,
        fitted,
        xi,
    })
}

/// `‖Y^β − Ad − Σc‖²_n + λ² cᵀΣc`.
pub fn oracle_beta_objective(
    gram: &GramSet,
    g_true: &[f64],
    lambda: f64,
    d: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<f64> {
    let yb = offset_response(gram, g_true, "known g values")?;
    let e = yb - gram.a() * d - gram.sigma() * c;
    Ok(e.norm_squared() / gram.n() as f64 + lambda * lambda * c.dot(&(gram.sigma() * c)))
}

/// `‖Y^g − Tl − Gη‖²_n + ξ² ηᵀGη` with `T = (1, Z)`.
pub fn oracle_g_objective(
    gram: &GramSet,
    functional_true: &[f64],
    xi: f64,
    l: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<f64> {
    let yg = offset_response(gram, functional_true, "known functional values")?;
    let t: DMatrix<f64> = gram.scalar_null_design();
    let e = yg - t * l - gram.g() * eta;
    Ok(e.norm_squared() / gram.n() as f64 + xi * xi * eta.dot(&(gram.g() * eta)))
}

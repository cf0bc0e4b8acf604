//! Everything about a fit that depends on the functional penalty `λ` alone.
//!
//! With `λ` fixed the functional block `(d, c)` can be eliminated in closed
//! form (see [`PenalizedStage`]), which leaves a quadratic problem in the
//! nonparametric block `θ = (l, η)` weighted by the stage residual operator
//! `R`. Eliminating `l` as well leaves
//!
//! ```text
//! min_η (Y − Gη)ᵀ M₂ (Y − Gη) / n + ξ² ηᵀ G η
//! ```
//!
//! whose stationarity condition `G [M₂ (Gη − Y) + nξ² η] = 0` is solved by
//! `(M₂ G + nξ² I) η = M₂ Y`. Writing `G = F Fᵀ` and diagonalising
//! `Fᵀ M₂ F = V Λ Vᵀ` gives `Gη = B (Λ + nξ²)⁻¹ Bᵀ M₂ Y` with `B = F V`, so a
//! whole sweep over `ξ` costs one eigen-decomposition.

use nalgebra::{DMatrix, DVector};

use super::stage::PenalizedStage;
use super::{Fit, FitConfig, GramSet, KernelFit, SemiNormFit, Variant, Weighting};
use crate::error::{Error, Result};
use crate::linalg::{check_finite_vec, symmetric_eigen, symmetrize, SpdFactor};

/// Result of evaluating a [`Profile`] at one `ξ`.
#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub fit: Fit,
    /// `‖Ŷ − Y‖²_n`.
    pub rss: f64,
    /// `tr(H_λ)` of the functional smoother.
    pub trace_h: f64,
    /// Trace of the full response-to-fit map.
    pub effective_dof: f64,
}

pub struct Profile<'g> {
    gram: &'g GramSet,
    variant: Variant,
    lambda: f64,
    weighting: Weighting,
    stage: PenalizedStage,
    trace_h: f64,
    null_op: Option<DMatrix<f64>>,
    m2: DMatrix<f64>,
    basis: DMatrix<f64>,
    shrink: DVector<f64>,
    projected_y: DVector<f64>,
    dof_base: f64,
    dof_terms: DVector<f64>,
}

impl<'g> Profile<'g> {
    pub(crate) fn build(
        gram: &'g GramSet,
        variant: Variant,
        lambda: f64,
        weighting: Weighting,
    ) -> Result<Self> {
        super::check_penalty("lambda", lambda)?;
        gram.check_variant(variant)?;
        let n = gram.n();
        let nf = n as f64;
        let stage = PenalizedStage::new(
            gram.sigma(),
            matches!(variant, Variant::SemiNorm).then(|| gram.a()),
            nf * lambda * lambda,
        )?;
        let r1 = stage.residual_operator();
        let trace_h = nf - r1.trace();

        let mut m = match weighting {
            Weighting::Exact => r1.clone(),
            Weighting::Squared => r1 * r1,
        };
        symmetrize(&mut m);

        let (null_op, m2, z) = match variant {
            Variant::SemiNorm => {
                let t = gram.scalar_null_design();
                let mt = &m * &t;
                let mut tmt = t.transpose() * &mt;
                symmetrize(&mut tmt);
                let fac = SpdFactor::new(&tmt, "nonparametric null-space system")?;
                let null_op = fac.solve_mat(&mt.transpose());
                let mut m2 = &m - &mt * &null_op;
                symmetrize(&mut m2);
                let z = r1 - (r1 * &t) * &null_op;
                (Some(null_op), m2, z)
            }
            Variant::KernelPenalty => (None, m.clone(), r1.clone()),
        };

        let f = gram.g_factor();
        let mut s = f.transpose() * &m2 * f;
        symmetrize(&mut s);
        let (mut shrink, v) = symmetric_eigen(&s);
        shrink.apply(|x| *x = x.max(0.0));
        let basis = f * v;
        let m2b = &m2 * &basis;
        let projected_y = m2b.transpose() * gram.y();
        let zb = &z * &basis;
        let dof_terms = DVector::from_fn(basis.ncols(), |k, _| m2b.column(k).dot(&zb.column(k)));
        let dof_base = z.trace();

        Ok(Profile {
            gram,
            variant,
            lambda,
            weighting,
            stage,
            trace_h,
            null_op,
            m2,
            basis,
            shrink,
            projected_y,
            dof_base,
            dof_terms,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn trace_h(&self) -> f64 {
        self.trace_h
    }

    /// `H_λ = I − R`.
    pub fn smoother(&self) -> DMatrix<f64> {
        let n = self.gram.n();
        DMatrix::identity(n, n) - self.stage.residual_operator()
    }

    /// Solve the full problem at nonparametric penalty `ξ`.
    pub fn at(&self, xi: f64) -> Result<ProfilePoint> {
        super::check_penalty("xi", xi)?;
        let gram = self.gram;
        let n = gram.n() as f64;
        let y = gram.y();
        let a = n * xi * xi;

        let scaled = self.projected_y.zip_map(&self.shrink, |u, s| u / (s + a));
        let g_eta_spectral = &self.basis * scaled;
        let eta = (&self.m2 * (y - g_eta_spectral)) / a;
        let g_eta = gram.g() * &eta;

        let (l, g_part) = match &self.null_op {
            Some(op) => {
                let l = op * (y - &g_eta);
                let g_part = gram.scalar_null_design() * &l + &g_eta;
                (Some(l), g_part)
            }
            None => (None, g_eta),
        };
        let target = y - &g_part;
        let sol = self.stage.solve(&target);
        let mut fitted = gram.sigma() * &sol.coef + &g_part;
        if let Some(d) = &sol.null {
            fitted += gram.a() * d;
        }
        check_finite_vec(&eta, "eta")?;
        check_finite_vec(&sol.coef, "c")?;
        check_finite_vec(&fitted, "fitted values")?;

        let rss = (y - &fitted).norm_squared() / n;
        let shrunk: f64 = self
            .dof_terms
            .iter()
            .zip(self.shrink.iter())
            .map(|(q, s)| q / (s + a))
            .sum();
        let effective_dof = n - (self.dof_base - shrunk);

        let config = FitConfig {
            lambda: self.lambda,
            xi,
            variant: self.variant,
            weighting: self.weighting,
        };
        let fit = match self.variant {
            Variant::KernelPenalty => Fit::Kernel(KernelFit {
                c: sol.coef,
                eta,
                fitted,
                config,
            }),
            Variant::SemiNorm => Fit::SemiNorm(SemiNormFit {
                d: sol
                    .null
                    .ok_or_else(|| Error::Singular("missing null-space block".into()))?,
                c: sol.coef,
                l: l.ok_or_else(|| Error::Singular("missing null-space block".into()))?,
                eta,
                fitted,
                config,
            }),
        };
        Ok(ProfilePoint {
            fit,
            rss,
            trace_h: self.trace_h,
            effective_dof,
        })
    }
}

//! Closed-form double-penalized least squares.
//!
//! Two interchangeable solvers share one data model ([`GramSet`]):
//!
//! * [`KernelPenalty`]: `β̂ = Σ cᵢ L_K Xᵢ`, `ĝ = Σ ηᵢ G(·, Zᵢ)`, minimizing
//!   `‖Y − Σc − Gη‖²_n + λ² cᵀΣc + ξ² ηᵀGη`.
//! * [`SemiNorm`]: adds the unpenalized affine parts `d₁ + d₂t` and
//!   `l₁ + l₂z`, minimizing
//!   `‖Y − Ad − Σc − Nθ‖²_n + λ² cᵀΣc + ξ² θᵀLθ`.
//!
//! Both are registered by name in an [`EstimatorRegistry`]. Neither iterates:
//! the functional block is eliminated in closed form and the remaining
//! nonparametric block is solved through one symmetric eigen-decomposition
//! per `λ` (see [`profile`]).

mod oracle;
pub mod profile;
mod stage;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use oracle::{
    oracle_beta_objective, oracle_fit_beta, oracle_fit_g, oracle_g_objective, BetaOracleFit,
    GOracleFit,
};
pub use profile::{Profile, ProfilePoint};

use crate::error::{Error, Result};
use crate::functional_data::{Curve, CurveSet, KernelSections, QuadratureRule};
use crate::kernels::{cross_matrix, gram_matrix, Kernel};
use crate::linalg::{is_symmetric, psd_factor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "kernel")]
    KernelPenalty,
    #[serde(rename = "seminorm")]
    SemiNorm,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::KernelPenalty => "kernel",
            Variant::SemiNorm => "seminorm",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the profiled nonparametric problem weights the functional residual.
///
/// `Exact` uses the stage residual operator `I − H_λ` itself, which is what
/// eliminating `(d, c)` from the joint objective produces. `Squared` uses
/// `(I − H_λ)ᵀ(I − H_λ)`, i.e. it drops the `λ² cᵀΣc` term from the profiled
/// objective; it is kept for comparison and does not minimize the joint
/// objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Exact,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda: f64,
    pub xi: f64,
    pub variant: Variant,
    #[serde(default)]
    pub weighting: Weighting,
}

impl FitConfig {
    pub fn new(lambda: f64, xi: f64, variant: Variant) -> Self {
        FitConfig {
            lambda,
            xi,
            variant,
            weighting: Weighting::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_penalty("lambda", self.lambda)?;
        check_penalty("xi", self.xi)
    }
}

pub(crate) fn check_penalty(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// The matrices a fit is assembled from.
///
/// `Σ` (functional Gram), `G` (scalar-covariate Gram), `A` (curve moments
/// `∫X`, `∫tX`), the scalar covariates `Z` and the responses `Y`. When built
/// from curves it also keeps the tabulated kernel sections and the kernel
/// `G`, which prediction needs.
#[derive(Clone)]
pub struct GramSet {
    sigma: DMatrix<f64>,
    g: DMatrix<f64>,
    a: DMatrix<f64>,
    z: Vec<Vec<f64>>,
    y: DVector<f64>,
    sections: Option<Arc<KernelSections>>,
    g_kernel: Option<Arc<dyn Kernel>>,
    g_factor: OnceLock<Arc<DMatrix<f64>>>,
}

impl fmt::Debug for GramSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramSet")
            .field("n", &self.n())
            .field("p", &self.z.first().map_or(0, Vec::len))
            .finish_non_exhaustive()
    }
}

impl GramSet {
    /// Assemble from curves, scalar covariates and responses.
    pub fn assemble(
        curves: &CurveSet,
        z: Vec<Vec<f64>>,
        y: Vec<f64>,
        k: &dyn Kernel,
        g_kernel: Arc<dyn Kernel>,
        q: &QuadratureRule,
    ) -> Result<Self> {
        let n = curves.len();
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                what: "scalar covariate rows",
                expected: n,
                found: z.len(),
            });
        }
        let sections = KernelSections::new(curves, k, q)?;
        let sigma = sections.sigma();
        let a = crate::functional_data::build_a(curves, q)?;
        let g = gram_matrix(g_kernel.as_ref(), &z)?;
        let mut gram = GramSet::from_matrices(sigma, g, a, z, y)?;
        gram.sections = Some(Arc::new(sections));
        gram.g_kernel = Some(g_kernel);
        Ok(gram)
    }

    /// Build directly from precomputed matrices. Prediction is unavailable
    /// on such a set.
    pub fn from_matrices(
        sigma: DMatrix<f64>,
        g: DMatrix<f64>,
        a: DMatrix<f64>,
        z: Vec<Vec<f64>>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        for (what, m, cols) in [("Sigma", &sigma, n), ("G", &g, n), ("A", &a, 2)] {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: m.nrows(),
                });
            }
            if m.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: cols,
                    found: m.ncols(),
                });
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(what));
            }
        }
        if !is_symmetric(&sigma, 1e-12) || !is_symmetric(&g, 1e-12) {
            return Err(Error::InvalidArgument(
                "Sigma and G must be symmetric".into(),
            ));
        }
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                what: "scalar covariate rows",
                expected: n,
                found: z.len(),
            });
        }
        let p = z[0].len();
        if p == 0 || z.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument(
                "scalar covariates must have the same positive dimension".into(),
            ));
        }
        if !z.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("scalar covariates"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(GramSet {
            sigma,
            g,
            a,
            z,
            y: DVector::from_vec(y),
            sections: None,
            g_kernel: None,
            g_factor: OnceLock::new(),
        })
    }

    /// Same design, different responses.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "responses",
                expected: self.n(),
                found: y.len(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        let mut out = self.clone();
        out.y = DVector::from_vec(y);
        Ok(out)
    }

    /// Reorder observations; prediction support is dropped.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| self.sigma[(perm[i], perm[j])]);
        let g = DMatrix::from_fn(n, n, |i, j| self.g[(perm[i], perm[j])]);
        let a = self.a.select_rows(perm);
        let z = perm.iter().map(|&i| self.z[i].clone()).collect();
        let y = perm.iter().map(|&i| self.y[i]).collect();
        GramSet::from_matrices(sigma, g, a, z, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn z(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sections(&self) -> Option<&KernelSections> {
        self.sections.as_deref()
    }

    pub fn g_kernel(&self) -> Option<&Arc<dyn Kernel>> {
        self.g_kernel.as_ref()
    }

    /// `(1, Z)`: basis of the unpenalized part of `g`, `n × (p + 1)`.
    pub fn scalar_null_design(&self) -> DMatrix<f64> {
        let p = self.z[0].len();
        DMatrix::from_fn(
            self.n(),
            p + 1,
            |i, j| if j == 0 { 1.0 } else { self.z[i][j - 1] },
        )
    }

    /// `N = (1, Z, G)`.
    pub fn n_matrix(&self) -> DMatrix<f64> {
        let t = self.scalar_null_design();
        let q = t.ncols();
        let n = self.n();
        DMatrix::from_fn(
            n,
            q + n,
            |i, j| if j < q { t[(i, j)] } else { self.g[(i, j - q)] },
        )
    }

    /// `L = diag(0, G)` matching the column order of [`GramSet::n_matrix`].
    pub fn l_matrix(&self) -> DMatrix<f64> {
        let q = self.z[0].len() + 1;
        let n = self.n();
        DMatrix::from_fn(q + n, q + n, |i, j| {
            if i < q || j < q {
                0.0
            } else {
                self.g[(i - q, j - q)]
            }
        })
    }

    pub(crate) fn g_factor(&self) -> &DMatrix<f64> {
        self.g_factor.get_or_init(|| Arc::new(psd_factor(&self.g)))
    }

    pub(crate) fn check_variant(&self, variant: Variant) -> Result<()> {
        if variant == Variant::SemiNorm {
            let n = self.n();
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "the semi-norm variant needs at least two observations".into(),
                ));
            }
            let ata = self.a.transpose() * &self.a;
            let eig = ata.symmetric_eigen().eigenvalues;
            let (lo, hi) = (eig.min(), eig.max());
            if !(hi > 0.0 && lo > 1e-12 * hi) {
                return Err(Error::Singular(
                    "moment matrix A is rank-deficient (curves share their first two moments)"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// Coefficients of the pure-kernel solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    pub c: DVector<f64>,
    pub eta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub config: FitConfig,
}

/// Coefficients of the semi-norm solution; `θ = (l, η)` stacks in the
/// column order of `N = (1, Z, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiNormFit {
    pub d: DVector<f64>,
    pub c: DVector<f64>,
    pub l: DVector<f64>,
    pub eta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub config: FitConfig,
}

impl SemiNormFit {
    pub fn theta(&self) -> DVector<f64> {
        let mut th = DVector::zeros(self.l.len() + self.eta.len());
        th.rows_mut(0, self.l.len()).copy_from(&self.l);
        th.rows_mut(self.l.len(), self.eta.len())
            .copy_from(&self.eta);
        th
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fit {
    Kernel(KernelFit),
    SemiNorm(SemiNormFit),
}

impl Fit {
    pub fn fitted(&self) -> &DVector<f64> {
        match self {
            Fit::Kernel(f) => &f.fitted,
            Fit::SemiNorm(f) => &f.fitted,
        }
    }

    pub fn config(&self) -> &FitConfig {
        match self {
            Fit::Kernel(f) => &f.config,
            Fit::SemiNorm(f) => &f.config,
        }
    }

    pub fn c(&self) -> &DVector<f64> {
        match self {
            Fit::Kernel(f) => &f.c,
            Fit::SemiNorm(f) => &f.c,
        }
    }

    pub fn eta(&self) -> &DVector<f64> {
        match self {
            Fit::Kernel(f) => &f.eta,
            Fit::SemiNorm(f) => &f.eta,
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        match self {
            Fit::Kernel(f) => Coefficients {
                d: None,
                c: f.c.clone(),
                l: None,
                eta: f.eta.clone(),
            },
            Fit::SemiNorm(f) => Coefficients {
                d: Some(f.d.clone()),
                c: f.c.clone(),
                l: Some(f.l.clone()),
                eta: f.eta.clone(),
            },
        }
    }

    /// Tabulate `β̂` and bind `ĝ` for repeated prediction.
    pub fn predictor(&self, gram: &GramSet) -> Result<Predictor> {
        let coefs = self.coefficients();
        Predictor::new(
            gram,
            &coefs.c,
            coefs.d.as_ref(),
            &coefs.eta,
            coefs.l.as_ref(),
        )
    }
}

/// Representer coefficients in a variant-agnostic layout. `d` and `l` are
/// present exactly for the semi-norm variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub d: Option<DVector<f64>>,
    pub c: DVector<f64>,
    pub l: Option<DVector<f64>>,
    pub eta: DVector<f64>,
}

impl Coefficients {
    pub fn zeros(gram: &GramSet, variant: Variant) -> Self {
        let n = gram.n();
        let q = gram.z[0].len() + 1;
        let semi = variant == Variant::SemiNorm;
        Coefficients {
            d: semi.then(|| DVector::zeros(2)),
            c: DVector::zeros(n),
            l: semi.then(|| DVector::zeros(q)),
            eta: DVector::zeros(n),
        }
    }

    /// Concatenation `(d, c, l, η)` with absent blocks skipped.
    pub fn to_flat(&self) -> DVector<f64> {
        let parts: Vec<&DVector<f64>> = [
            self.d.as_ref(),
            Some(&self.c),
            self.l.as_ref(),
            Some(&self.eta),
        ]
        .into_iter()
        .flatten()
        .collect();
        let len = parts.iter().map(|p| p.len()).sum();
        DVector::from_iterator(len, parts.into_iter().flat_map(|p| p.iter().copied()))
    }

    /// Inverse of [`Coefficients::to_flat`] with the block sizes of `self`.
    pub fn from_flat_like(&self, flat: &DVector<f64>) -> Self {
        let mut offset = 0;
        let mut take = |len: usize| {
            let v = flat.rows(offset, len).into_owned();
            offset += len;
            v
        };
        let d = self.d.as_ref().map(|d| take(d.len()));
        let c = take(self.c.len());
        let l = self.l.as_ref().map(|l| take(l.len()));
        let eta = take(self.eta.len());
        Coefficients { d, c, l, eta }
    }

    fn check(&self, gram: &GramSet, variant: Variant) -> Result<()> {
        let n = gram.n();
        let q = gram.z[0].len() + 1;
        let semi = variant == Variant::SemiNorm;
        let dims = [
            ("c", self.c.len(), n),
            ("eta", self.eta.len(), n),
            (
                "d",
                self.d.as_ref().map_or(0, |v| v.len()),
                if semi { 2 } else { 0 },
            ),
            (
                "l",
                self.l.as_ref().map_or(0, |v| v.len()),
                if semi { q } else { 0 },
            ),
        ];
        for (what, found, expected) in dims {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    fn residual(&self, gram: &GramSet) -> DVector<f64> {
        let mut e = gram.y() - gram.sigma() * &self.c - gram.g() * &self.eta;
        if let Some(d) = &self.d {
            e -= gram.a() * d;
        }
        if let Some(l) = &self.l {
            e -= gram.scalar_null_design() * l;
        }
        e
    }
}

/// Finite-dimensional objective of the selected variant.
pub fn objective_value(gram: &GramSet, cfg: &FitConfig, coefs: &Coefficients) -> Result<f64> {
    coefs.check(gram, cfg.variant)?;
    let n = gram.n() as f64;
    let e = coefs.residual(gram);
    let pen_c = coefs.c.dot(&(gram.sigma() * &coefs.c));
    let pen_eta = coefs.eta.dot(&(gram.g() * &coefs.eta));
    Ok(e.norm_squared() / n + cfg.lambda.powi(2) * pen_c + cfg.xi.powi(2) * pen_eta)
}

/// Gradient of [`objective_value`] with respect to every coefficient block.
pub fn objective_gradient(
    gram: &GramSet,
    cfg: &FitConfig,
    coefs: &Coefficients,
) -> Result<Coefficients> {
    coefs.check(gram, cfg.variant)?;
    let n = gram.n() as f64;
    let e = coefs.residual(gram);
    let sig_e = gram.sigma() * &e;
    let g_e = gram.g() * &e;
    Ok(Coefficients {
        d: coefs
            .d
            .as_ref()
            .map(|_| gram.a().transpose() * &e * (-2.0 / n)),
        c: sig_e * (-2.0 / n) + gram.sigma() * &coefs.c * (2.0 * cfg.lambda.powi(2)),
        l: coefs
            .l
            .as_ref()
            .map(|_| gram.scalar_null_design().transpose() * &e * (-2.0 / n)),
        eta: g_e * (-2.0 / n) + gram.g() * &coefs.eta * (2.0 * cfg.xi.powi(2)),
    })
}

/// Evaluates `f̂(X, Z) = ∫X β̂ + ĝ(Z)` for new observations.
#[derive(Debug, Clone)]
pub struct Predictor {
    slope: Curve,
    quadrature: QuadratureRule,
    eta: DVector<f64>,
    l: Option<DVector<f64>>,
    z_train: Vec<Vec<f64>>,
    g_kernel: Arc<dyn Kernel>,
}

/// One prediction split into its two components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub functional: f64,
    pub nonparametric: f64,
}

impl Predictor {
    pub(crate) fn new(
        gram: &GramSet,
        c: &DVector<f64>,
        d: Option<&DVector<f64>>,
        eta: &DVector<f64>,
        l: Option<&DVector<f64>>,
    ) -> Result<Self> {
        let (sections, g_kernel) = match (&gram.sections, &gram.g_kernel) {
            (Some(s), Some(k)) => (s, k),
            _ => {
                return Err(Error::InvalidArgument(
                    "prediction needs a Gram set assembled from curves".into(),
                ))
            }
        };
        Ok(Predictor {
            slope: sections.slope_function(c, d),
            quadrature: sections.quadrature().clone(),
            eta: eta.clone(),
            l: l.cloned(),
            z_train: gram.z.clone(),
            g_kernel: g_kernel.clone(),
        })
    }

    /// `β̂` tabulated on the training grid.
    pub fn slope(&self) -> &Curve {
        &self.slope
    }

    pub fn functional(&self, x: &Curve) -> Result<f64> {
        crate::functional_data::functional_dot(x, &self.slope, &self.quadrature)
    }

    pub fn nonparametric(&self, z: &[f64]) -> Result<f64> {
        let row = cross_matrix(self.g_kernel.as_ref(), &[z], &self.z_train)?;
        let mut v = (row * &self.eta)[0];
        if let Some(l) = &self.l {
            if l.len() != z.len() + 1 {
                return Err(Error::DimensionMismatch {
                    what: "scalar covariate",
                    expected: l.len() - 1,
                    found: z.len(),
                });
            }
            v += l[0]
                + z.iter()
                    .zip(l.iter().skip(1))
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        Ok(v)
    }

    /// Batch version of [`Predictor::nonparametric`].
    pub fn nonparametric_many(&self, z: &[Vec<f64>]) -> Result<Vec<f64>> {
        let cross = cross_matrix(self.g_kernel.as_ref(), z, &self.z_train)?;
        let mut out = cross * &self.eta;
        if let Some(l) = &self.l {
            for (o, zi) in out.iter_mut().zip(z) {
                *o += l[0]
                    + zi.iter()
                        .zip(l.iter().skip(1))
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
        }
        Ok(out.iter().copied().collect())
    }

    pub fn predict(&self, x: &Curve, z: &[f64]) -> Result<Prediction> {
        let functional = self.functional(x)?;
        let nonparametric = self.nonparametric(z)?;
        Ok(Prediction {
            value: functional + nonparametric,
            functional,
            nonparametric,
        })
    }
}

/// Prediction at a single new observation.
pub fn predict(fit: &Fit, x_new: &Curve, z_new: &[f64], gram: &GramSet) -> Result<Prediction> {
    fit.predictor(gram)?.predict(x_new, z_new)
}

/// A double-penalized solver selectable by name.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn variant(&self) -> Variant;

    /// Precompute every quantity that depends on `λ` but not on `ξ`.
    fn profile<'g>(
        &self,
        gram: &'g GramSet,
        lambda: f64,
        weighting: Weighting,
    ) -> Result<Profile<'g>> {
        Profile::build(gram, self.variant(), lambda, weighting)
    }

    fn fit(&self, gram: &GramSet, cfg: &FitConfig) -> Result<Fit> {
        cfg.validate()?;
        Ok(self
            .profile(gram, cfg.lambda, cfg.weighting)?
            .at(cfg.xi)?
            .fit)
    }

    /// The functional smoother `H_λ`.
    fn smoother(&self, gram: &GramSet, lambda: f64) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KernelPenalty;

impl Estimator for KernelPenalty {
    fn name(&self) -> &'static str {
        "kernel"
    }

    fn variant(&self) -> Variant {
        Variant::KernelPenalty
    }

    fn smoother(&self, gram: &GramSet, lambda: f64) -> Result<DMatrix<f64>> {
        check_penalty("lambda", lambda)?;
        let n = gram.n();
        let stage = stage::PenalizedStage::new(gram.sigma(), None, n as f64 * lambda * lambda)?;
        Ok(DMatrix::identity(n, n) - stage.residual_operator())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SemiNorm;

impl Estimator for SemiNorm {
    fn name(&self) -> &'static str {
        "seminorm"
    }

    fn variant(&self) -> Variant {
        Variant::SemiNorm
    }

    fn smoother(&self, gram: &GramSet, lambda: f64) -> Result<DMatrix<f64>> {
        check_penalty("lambda", lambda)?;
        gram.check_variant(Variant::SemiNorm)?;
        let n = gram.n();
        let stage =
            stage::PenalizedStage::new(gram.sigma(), Some(gram.a()), n as f64 * lambda * lambda)?;
        Ok(DMatrix::identity(n, n) - stage.residual_operator())
    }
}

type EstimatorFactory = fn() -> Box<dyn Estimator>;

/// Name → solver table.
pub struct EstimatorRegistry {
    factories: BTreeMap<&'static str, EstimatorFactory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        EstimatorRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: EstimatorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Box<dyn Estimator>> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "estimator",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn for_variant(&self, variant: Variant) -> Result<Box<dyn Estimator>> {
        self.get(variant.name())
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut r = EstimatorRegistry::empty();
        r.register("kernel", || Box::new(KernelPenalty));
        r.register("seminorm", || Box::new(SemiNorm));
        r
    }
}

/// Closed-form fit of the pure-kernel variant.
pub fn fit_kernel_penalty(gram: &GramSet, cfg: &FitConfig) -> Result<KernelFit> {
    let cfg = FitConfig {
        variant: Variant::KernelPenalty,
        ..*cfg
    };
    match KernelPenalty.fit(gram, &cfg)? {
        Fit::Kernel(f) => Ok(f),
        Fit::SemiNorm(_) => unreachable!("kernel estimator returned a semi-norm fit"),
    }
}

/// Closed-form fit of the semi-norm variant.
pub fn fit_seminorm(gram: &GramSet, cfg: &FitConfig) -> Result<SemiNormFit> {
    let cfg = FitConfig {
        variant: Variant::SemiNorm,
        ..*cfg
    };
    match SemiNorm.fit(gram, &cfg)? {
        Fit::SemiNorm(f) => Ok(f),
        Fit::Kernel(_) => unreachable!("semi-norm estimator returned a kernel fit"),
    }
}

/// `H_λ` of the selected variant.
pub fn smoother_matrix(gram: &GramSet, cfg: &FitConfig) -> Result<DMatrix<f64>> {
    match cfg.variant {
        Variant::KernelPenalty => KernelPenalty.smoother(gram, cfg.lambda),
        Variant::SemiNorm => SemiNorm.smoother(gram, cfg.lambda),
    }
}

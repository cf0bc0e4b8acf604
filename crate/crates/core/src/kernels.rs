//! Reproducing kernels and Gram matrix assembly.
//!
//! Each kernel family implements [`Kernel`] and is registered by name in a
//! [`KernelRegistry`], so a configuration file can pick the functional kernel
//! `K` and the scalar-covariate kernel `G` at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric nonnegative-definite kernel on a box domain.
pub trait Kernel: Send + Sync + fmt::Debug {
    /// Registry name of the family.
    fn name(&self) -> &'static str;

    /// Evaluate without domain checks. Callers validate points first.
    fn eval_unchecked(&self, s: &[f64], t: &[f64]) -> f64;

    /// Reject points outside the kernel's domain.
    fn check_point(&self, p: &[f64]) -> Result<()>;
}

/// Bernoulli polynomials `B₂` and `B₄` on `[0, 1]`.
pub fn bernoulli_poly(l: u32, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "Bernoulli polynomial argument {x} outside [0, 1]"
        )));
    }
    match l {
        2 => Ok(b2(x)),
        4 => Ok(b4(x)),
        _ => Err(Error::InvalidArgument(format!(
            "Bernoulli polynomial order {l} not supported (expected 2 or 4)"
        ))),
    }
}

#[inline]
fn b2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

#[inline]
fn b4(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 2.0 * x2 * x + x2 - 1.0 / 30.0
}

/// Reproducing kernel of the penalized part of the second-order Sobolev
/// space on `[0, 1]`: `K(s,t) = B₂(s)B₂(t)/4 − B₄(|s−t|)/24`.
///
/// The null space `{1, t}` is handled separately by the semi-norm solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct BernoulliSobolev;

impl Kernel for BernoulliSobolev {
    fn name(&self) -> &'static str {
        "bernoulli-sobolev"
    }

    #[inline]
    fn eval_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        let (s, t) = (s[0], t[0]);
        b2(s) * b2(t) / 4.0 - b4((s - t).abs()) / 24.0
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() == 1 && (0.0..=1.0).contains(&p[0]) {
            Ok(())
        } else {
            Err(Error::Domain {
                kernel: self.name(),
                point: p.to_vec(),
            })
        }
    }
}

/// `G(z,w) = exp(−‖z−w‖² / σ²)`.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    bandwidth: f64,
}

impl Gaussian {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Gaussian { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl Kernel for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn eval_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        let d2: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (self.bandwidth * self.bandwidth)).exp()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        finite_point(self.name(), p)
    }
}

/// `G(z,w) = (zᵀw + 1)^d`.
#[derive(Debug, Clone, Copy)]
pub struct Polynomial {
    degree: u32,
}

impl Polynomial {
    pub fn new(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument(
                "polynomial kernel degree must be at least 1".into(),
            ));
        }
        Ok(Polynomial { degree })
    }
}

impl Kernel for Polynomial {
    fn name(&self) -> &'static str {
        "polynomial"
    }

    fn eval_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        let dot: f64 = s.iter().zip(t).map(|(a, b)| a * b).sum();
        (dot + 1.0).powi(self.degree as i32)
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        finite_point(self.name(), p)
    }
}

fn finite_point(kernel: &'static str, p: &[f64]) -> Result<()> {
    if !p.is_empty() && p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain {
            kernel,
            point: p.to_vec(),
        })
    }
}

/// Checked kernel evaluation.
pub fn kernel_eval(k: &dyn Kernel, s: &[f64], t: &[f64]) -> Result<f64> {
    k.check_point(s)?;
    k.check_point(t)?;
    if s.len() != t.len() {
        return Err(Error::DimensionMismatch {
            what: "kernel arguments",
            expected: s.len(),
            found: t.len(),
        });
    }
    Ok(k.eval_unchecked(s, t))
}

/// Gram matrix `M[i][j] = k(points[i], points[j])`.
///
/// The upper triangle is evaluated once per unordered pair and mirrored, so
/// the result is exactly symmetric.
pub fn gram_matrix<P: AsRef<[f64]>>(k: &dyn Kernel, points: &[P]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "Gram matrix needs at least one point".into(),
        ));
    }
    let dim = points[0].as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "kernel points",
                expected: dim,
                found: p.len(),
            });
        }
        k.check_point(p)?;
    }
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval_unchecked(points[i].as_ref(), points[j].as_ref());
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Cross-kernel matrix `M[i][j] = k(rows[i], cols[j])`.
pub fn cross_matrix<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    k: &dyn Kernel,
    rows: &[P],
    cols: &[Q],
) -> Result<DMatrix<f64>> {
    for p in rows
        .iter()
        .map(AsRef::as_ref)
        .chain(cols.iter().map(AsRef::as_ref))
    {
        k.check_point(p)?;
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        k.eval_unchecked(rows[i].as_ref(), cols[j].as_ref())
    }))
}

/// Declarative kernel selection, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
}

impl KernelSpec {
    pub fn named(name: &str) -> Self {
        KernelSpec {
            name: name.to_string(),
            bandwidth: None,
            degree: None,
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::named("bernoulli-sobolev")
    }
}

type KernelFactory = fn(&KernelSpec) -> Result<Arc<dyn Kernel>>;

/// Name → constructor table for kernel families.
pub struct KernelRegistry {
    factories: BTreeMap<&'static str, KernelFactory>,
}

impl KernelRegistry {
    pub fn empty() -> Self {
        KernelRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: KernelFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Arc<dyn Kernel>> {
        let factory =
            self.factories
                .get(spec.name.as_str())
                .ok_or_else(|| Error::UnknownStrategy {
                    kind: "kernel",
                    name: spec.name.clone(),
                    known: self.names().join(", "),
                })?;
        factory(spec)
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        let mut r = KernelRegistry::empty();
        r.register("bernoulli-sobolev", |spec| {
            reject_params(spec, spec.bandwidth.is_some() || spec.degree.is_some())?;
            Ok(Arc::new(BernoulliSobolev))
        });
        r.register("gaussian", |spec| {
            reject_params(spec, spec.degree.is_some())?;
            Ok(Arc::new(Gaussian::new(spec.bandwidth.unwrap_or(1.0))?))
        });
        r.register("polynomial", |spec| {
            reject_params(spec, spec.bandwidth.is_some())?;
            Ok(Arc::new(Polynomial::new(spec.degree.unwrap_or(2))?))
        });
        r
    }
}

fn reject_params(spec: &KernelSpec, bad: bool) -> Result<()> {
    if bad {
        Err(Error::Config(format!(
            "kernel `{}` got a parameter it does not take",
            spec.name
        )))
    } else {
        Ok(())
    }
}

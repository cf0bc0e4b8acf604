//! The TOML run configuration shared by every CLI subcommand.
//!
//! Unknown keys are rejected everywhere. Every section is optional and
//! falls back to its defaults; a section only has to be complete enough for
//! the command that reads it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional_data::{Grid, DEFAULT_GRID_POINTS};
use crate::kernels::{KernelRegistry, KernelSpec};
use crate::simulation::{ExperimentConfig, TuningConfig, DEFAULT_TEST_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub fit: FitSection,
    pub experiment: ExperimentConfig,
    pub simulate: SimulateSection,
    pub diagnose: DiagnoseSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads: None,
            out_dir: PathBuf::from("out"),
            fit: FitSection::default(),
            experiment: ExperimentConfig::default(),
            simulate: SimulateSection::default(),
            diagnose: DiagnoseSection::default(),
        }
    }
}

/// Inputs for `fit` and `gcv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub curves: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub functional_kernel: KernelSpec,
    pub nonparametric_kernel: KernelSpec,
    /// Fixed penalties; when both are given `fit` skips the grid search.
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    pub tuning: TuningConfig,
}

/// One simulated dataset written to disk by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: usize,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub n_star: usize,
    pub sigma_eps: f64,
    pub seed: u64,
    pub grid_points: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            n: 100,
            upsilon1: 1.1,
            upsilon2: 1.5,
            n_star: DEFAULT_TEST_SIZE,
            sigma_eps: 1.0,
            seed: 1,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramKind {
    /// `G / n` over simulated scalar covariates.
    Scalar,
    /// `Σ / n` over simulated curves.
    Functional,
}

/// Spectral decay of a simulated Gram proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    pub matrix: GramKind,
    pub n: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub kernel: KernelSpec,
    pub upsilon1: f64,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            matrix: GramKind::Scalar,
            n: 500,
            k_min: 2,
            k_max: 15,
            kernel: KernelSpec::default(),
            upsilon1: 1.1,
            grid_points: DEFAULT_GRID_POINTS,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Set every seed in the file to `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
        self.simulate.seed = seed;
        self.diagnose.seed = seed;
    }

    /// Check everything that can be checked without touching data files.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("`threads` must be positive".into()));
        }
        self.experiment.validate()?;
        let kernels = KernelRegistry::default();
        kernels.build(&self.fit.functional_kernel)?;
        kernels.build(&self.fit.nonparametric_kernel)?;
        self.fit.tuning.lambda.resolve()?;
        self.fit.tuning.xi.resolve()?;
        for (name, v) in [("fit.lambda", self.fit.lambda), ("fit.xi", self.fit.xi)] {
            if let Some(v) = v {
                crate::estimator::check_penalty(name, v)?;
            }
        }
        let s = &self.simulate;
        let mut sim = crate::simulation::SimConfig::new(s.n, s.upsilon1, s.upsilon2);
        sim.n_star = s.n_star;
        sim.sigma_eps = s.sigma_eps;
        sim.validate()?;
        Grid::new(s.grid_points)?;
        let d = &self.diagnose;
        kernels.build(&d.kernel)?;
        Grid::new(d.grid_points)?;
        if d.k_min > d.k_max || d.k_max < 2 || d.n < d.k_max + 2 {
            return Err(Error::Config(format!(
                "diagnose needs 2 <= k_max, k_min <= k_max and n >= k_max + 2 (got n = {}, range {}..={})",
                d.n, d.k_min, d.k_max
            )));
        }
        if d.matrix == GramKind::Functional && !(d.upsilon1 > 1.0 && d.upsilon1.is_finite()) {
            return Err(Error::Config(format!(
                "diagnose.upsilon1 must exceed 1, got {}",
                d.upsilon1
            )));
        }
        Ok(())
    }
}

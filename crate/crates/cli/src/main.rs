use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semifunc::config::{GramKind, RunConfig};
use semifunc::diagnostics::{empirical_eigendecay, functional_gram_proxy, scalar_gram_proxy};
use semifunc::error::{Error, Result};
use semifunc::model_selection::{grid_search, GcvGrid};
use semifunc::report::{self, ReportHeader, Selection};
use semifunc::simulation::{generate_dataset, run_scenario, SimConfig, Truth};
use semifunc::{
    io, EstimatorRegistry, FitConfig, GramSet, Grid, KernelRegistry, QuadratureRule, Variant,
};

#[derive(Parser)]
#[command(
    name = "semifunc",
    version,
    about = "Double-penalized fits of the semi-functional linear model"
)]
struct Cli {
    /// TOML run configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `out_dir` from the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Kernel,
    Seminorm,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Kernel => Variant::KernelPenalty,
            VariantArg::Seminorm => Variant::SemiNorm,
        }
    }
}

#[derive(clap::Args)]
struct DataArgs {
    /// Curve CSV: the first row is the grid, then one curve per row.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Scalar covariate CSV, one observation per row.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Response CSV, one value per row.
    #[arg(long)]
    responses: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one dataset and write coefficients, fitted values and the GCV surface.
    Fit(DataArgs),
    /// Evaluate the GCV surface only.
    Gcv(DataArgs),
    /// Run a simulation sweep and write per-replicate and per-cell reports.
    Experiment,
    /// Fit the eigenvalue decay of a simulated Gram proxy.
    Diagnose,
    /// Write one simulated dataset in the `fit` input format.
    Simulate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(v) = cli.variant {
        cfg.fit.tuning.variant = v.into();
        cfg.experiment.tuning.variant = v.into();
    }
    cfg.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fit(args) => cmd_fit(&cfg, &args, true),
        Command::Gcv(args) => cmd_fit(&cfg, &args, false),
        Command::Experiment => cmd_experiment(&cfg),
        Command::Diagnose => cmd_diagnose(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
    })
}

fn create_out(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.out_dir.as_path();
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    report::write_text(&path, body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn input(flag: &Option<PathBuf>, configured: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| Error::Config(format!("no input file: pass --{key} or set fit.{key}")))
}

fn cmd_fit(cfg: &RunConfig, args: &DataArgs, fit: bool) -> Result<()> {
    let section = &cfg.fit;
    let px = input(&args.curves, &section.curves, "curves")?;
    let pz = input(&args.covariates, &section.covariates, "covariates")?;
    let py = input(&args.responses, &section.responses, "responses")?;
    let curves = io::read_curves(&px)?;
    let z = io::read_covariates(&pz)?;
    let y = io::read_responses(&py)?;
    io::check_row_counts([(&px, curves.len()), (&pz, z.len()), (&py, y.len())])?;

    let kernels = KernelRegistry::default();
    let k = kernels.build(&section.functional_kernel)?;
    let g_kernel = kernels.build(&section.nonparametric_kernel)?;
    let q = QuadratureRule::simpson(curves.grid());
    let gram = GramSet::assemble(&curves, z, y.clone(), k.as_ref(), Arc::clone(&g_kernel), &q)?;

    let tuning = &section.tuning;
    let estimator = EstimatorRegistry::default().for_variant(tuning.variant)?;
    let header = ReportHeader::for_config(section, run_seed(cfg))?;
    let dir = create_out(cfg)?;

    let fixed = match (section.lambda, section.xi) {
        (Some(l), Some(x)) if fit => Some((l, x)),
        _ => None,
    };
    let (selection, grid) = match fixed {
        Some((lambda, xi)) => {
            let sel = Selection {
                variant: tuning.variant,
                lambda,
                xi,
                gcv: None,
                trace_h: None,
                effective_dof: None,
                n: gram.n(),
            };
            (sel, None)
        }
        None => {
            let lambdas = match section.lambda {
                Some(l) => vec![l],
                None => tuning.lambda.resolve()?,
            };
            let xis = match section.xi {
                Some(x) => vec![x],
                None => tuning.xi.resolve()?,
            };
            let grid = grid_search(
                &gram,
                estimator.as_ref(),
                &lambdas,
                &xis,
                tuning.rule(),
                tuning.weighting,
            )?;
            (
                Selection::from_grid(&grid, tuning.variant, gram.n()),
                Some(grid),
            )
        }
    };
    if let Some(grid) = &grid {
        write(
            dir,
            "gcv_surface.csv",
            &report::gcv_surface_csv(grid, &header)?,
        )?;
    }
    write(
        dir,
        "selection.json",
        &report::selection_json(&selection, &header)?,
    )?;
    print_selection(&selection, grid.as_ref());
    if !fit {
        return Ok(());
    }

    let mut fit_cfg = FitConfig::new(selection.lambda, selection.xi, tuning.variant);
    fit_cfg.weighting = tuning.weighting;
    let fitted = estimator
        .fit(&gram, &fit_cfg)
        .map_err(|e| at_penalties(e, &fit_cfg))?;
    let fitted_values: Vec<f64> = fitted.fitted().iter().copied().collect();
    write(
        dir,
        "coefficients.csv",
        &report::coefficients_csv(&fitted.coefficients(), &header)?,
    )?;
    write(
        dir,
        "fitted.csv",
        &report::fitted_csv(&y, &fitted_values, &header)?,
    )?;
    let predictor = fitted.predictor(&gram)?;
    write(
        dir,
        "slope.csv",
        &report::slope_csv(predictor.slope(), &header)?,
    )?;
    Ok(())
}

fn at_penalties(e: Error, cfg: &FitConfig) -> Error {
    match e {
        Error::Singular(m) => {
            Error::Singular(format!("{m} (lambda = {}, xi = {})", cfg.lambda, cfg.xi))
        }
        other => other,
    }
}

/// Seed recorded in the headers of commands that draw no random numbers.
fn run_seed(cfg: &RunConfig) -> u64 {
    cfg.experiment.seed
}

fn print_selection(sel: &Selection, grid: Option<&GcvGrid>) {
    match (sel.gcv, grid) {
        (Some(score), Some(g)) => println!(
            "{} fit: lambda = {:e}, xi = {:e}, gcv = {:.6e} over {}x{} grid",
            sel.variant,
            sel.lambda,
            sel.xi,
            score,
            g.lambda_values.len(),
            g.xi_values.len()
        ),
        _ => println!(
            "{} fit: lambda = {:e}, xi = {:e} (fixed)",
            sel.variant, sel.lambda, sel.xi
        ),
    }
}

fn cmd_experiment(cfg: &RunConfig) -> Result<()> {
    let exp = &cfg.experiment;
    let header = ReportHeader::for_config(exp, exp.seed)?;
    let report = run_scenario(exp)?;
    let dir = create_out(cfg)?;
    for path in report::write_experiment(dir, &report, &header)? {
        println!("wrote {}", path.display());
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
    println!(
        "{:>6} {:>8} {:>8} {:>12} {:>12} {:>8}",
        "n", "u1", "u2", "beta_err", "g_err", "failed"
    );
    for c in &report.cells {
        println!(
            "{:>6} {:>8} {:>8} {:>12} {:>12} {:>8}",
            c.n,
            c.upsilon1,
            c.upsilon2,
            fmt(c.beta_error_mean),
            fmt(c.g_error_mean),
            c.failures
        );
    }
    for s in &report.slopes {
        println!(
            "slope {:?} at ({}, {}): {:.3} ± {:.3}",
            s.component, s.upsilon1, s.upsilon2, s.slope, s.std_err
        );
    }
    Ok(())
}

fn cmd_diagnose(cfg: &RunConfig) -> Result<()> {
    let d = &cfg.diagnose;
    let kernel = KernelRegistry::default().build(&d.kernel)?;
    let m = match d.matrix {
        GramKind::Scalar => scalar_gram_proxy(kernel.as_ref(), d.n, d.seed)?,
        GramKind::Functional => {
            let q = QuadratureRule::simpson(Grid::new(d.grid_points)?);
            functional_gram_proxy(kernel.as_ref(), &q, d.n, d.upsilon1, d.seed)?
        }
    };
    let decay = empirical_eigendecay(&m, d.k_min, d.k_max)?;
    let header = ReportHeader::for_config(d, d.seed)?;
    let dir = create_out(cfg)?;
    write(dir, "spectrum.csv", &report::spectrum_csv(&decay, &header)?)?;
    println!(
        "eigenvalue decay exponent {:.4} over k = {}..={}",
        decay.exponent, decay.k_min, decay.k_max
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.simulate;
    let mut sim = SimConfig::new(s.n, s.upsilon1, s.upsilon2);
    sim.n_star = s.n_star;
    sim.sigma_eps = s.sigma_eps;
    sim.seed = s.seed;
    let truth = Truth::new(s.upsilon2, Grid::new(s.grid_points)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let data = generate_dataset(&sim, &truth, &mut rng)?;
    let dir = create_out(cfg)?;
    for (prefix, sample) in [("", &data.train), ("test_", &data.test)] {
        let curves = dir.join(format!("{prefix}curves.csv"));
        let covariates = dir.join(format!("{prefix}covariates.csv"));
        let responses = dir.join(format!("{prefix}responses.csv"));
        io::write_curves(&curves, &sample.curves)?;
        io::write_covariates(&covariates, &sample.z)?;
        io::write_responses(&responses, &sample.y)?;
        for path in [curves, covariates, responses] {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

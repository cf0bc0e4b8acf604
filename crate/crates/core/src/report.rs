//! Versioned CSV, JSON and SVG outputs.
//!
//! Every file starts with a header recording the schema version, the
//! SHA-256 of the JSON-serialised configuration and the base seed: a
//! `# …` line for CSV, a `header` object for JSON and an XML comment for
//! SVG. Floating-point fields are written with 17 significant digits so
//! they round-trip exactly; absent values are empty fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::DecayReport;
use crate::error::{Error, Result};
use crate::estimator::{Coefficients, Variant};
use crate::functional_data::Curve;
use crate::io::format_number;
use crate::model_selection::GcvGrid;
use crate::simulation::{CellSummary, Component, ScenarioReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub config_sha256: String,
    pub seed: u64,
}

impl ReportHeader {
    pub fn for_config<T: Serialize>(config: &T, seed: u64) -> Result<Self> {
        Ok(ReportHeader {
            schema_version: SCHEMA_VERSION,
            config_sha256: config_hash(config)?,
            seed,
        })
    }

    pub fn comment(&self) -> String {
        format!(
            "semifunc schema={} config_sha256={} seed={}",
            self.schema_version, self.config_sha256, self.seed
        )
    }
}

/// Hex SHA-256 of the configuration's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

struct Table {
    out: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &ReportHeader, columns: &[&str]) -> Result<Self> {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("# {}\n", header.comment()).as_bytes());
        let mut out = csv::Writer::from_writer(buf);
        out.write_record(columns).map_err(csv_err)?;
        Ok(Table { out })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.out.write_record(&fields).map_err(csv_err)
    }

    fn finish(self) -> Result<String> {
        let bytes = self
            .out
            .into_inner()
            .map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// One row per replicate of every cell.
pub fn replicates_csv(report: &ScenarioReport, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(
        header,
        &[
            "scenario",
            "n",
            "upsilon1",
            "upsilon2",
            "replicate",
            "seed",
            "beta_error",
            "g_error",
            "total_error",
            "lambda",
            "xi",
            "gcv",
            "grid_min_beta_error",
            "grid_min_g_error",
            "grid_min_total_error",
            "failure",
        ],
    )?;
    for r in &report.records {
        let o = &r.outcome;
        t.row(vec![
            r.scenario.name().to_string(),
            r.n.to_string(),
            format_number(r.upsilon1),
            format_number(r.upsilon2),
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(o.beta_error),
            opt(o.g_error),
            opt(o.total_error),
            opt(o.lambda),
            opt(o.xi),
            opt(o.gcv),
            opt(o.grid_min_beta_error),
            opt(o.grid_min_g_error),
            opt(o.grid_min_total_error),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    t.finish()
}

/// One row per `(n, υ₁, υ₂)` cell.
pub fn cells_csv(report: &ScenarioReport, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(
        header,
        &[
            "scenario",
            "n",
            "upsilon1",
            "upsilon2",
            "reps",
            "failures",
            "beta_error_mean",
            "beta_error_sd",
            "g_error_mean",
            "g_error_sd",
            "total_error_mean",
            "lambda_geomean",
            "xi_geomean",
            "grid_min_beta_error_mean",
            "grid_min_g_error_mean",
            "grid_min_total_error_mean",
        ],
    )?;
    for c in &report.cells {
        t.row(vec![
            c.scenario.name().to_string(),
            c.n.to_string(),
            format_number(c.upsilon1),
            format_number(c.upsilon2),
            c.reps.to_string(),
            c.failures.to_string(),
            opt(c.beta_error_mean),
            opt(c.beta_error_sd),
            opt(c.g_error_mean),
            opt(c.g_error_sd),
            opt(c.total_error_mean),
            opt(c.lambda_geomean),
            opt(c.xi_geomean),
            opt(c.grid_min_beta_error_mean),
            opt(c.grid_min_g_error_mean),
            opt(c.grid_min_total_error_mean),
        ])?;
    }
    t.finish()
}

pub fn slopes_csv(report: &ScenarioReport, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(
        header,
        &[
            "upsilon1",
            "upsilon2",
            "component",
            "slope",
            "std_err",
            "sample_sizes",
        ],
    )?;
    for s in &report.slopes {
        let sizes: Vec<String> = s.sample_sizes.iter().map(usize::to_string).collect();
        t.row(vec![
            format_number(s.upsilon1),
            format_number(s.upsilon2),
            match s.component {
                Component::Beta => "beta".into(),
                Component::G => "g".into(),
            },
            format_number(s.slope),
            format_number(s.std_err),
            sizes.join(" "),
        ])?;
    }
    t.finish()
}

/// Columns `lambda, xi, gcv, trace_H`; failed pairs have an empty score.
pub fn gcv_surface_csv(grid: &GcvGrid, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(header, &["lambda", "xi", "gcv", "trace_H"])?;
    let finite = |v: f64| {
        if v.is_nan() {
            String::new()
        } else if v.is_infinite() {
            "inf".into()
        } else {
            format_number(v)
        }
    };
    for (i, &lam) in grid.lambda_values.iter().enumerate() {
        for (j, &xi) in grid.xi_values.iter().enumerate() {
            t.row(vec![
                format_number(lam),
                format_number(xi),
                finite(grid.scores[(i, j)]),
                finite(grid.traces[(i, j)]),
            ])?;
        }
    }
    t.finish()
}

/// Columns `k, eigenvalue, in_fit`.
pub fn spectrum_csv(decay: &DecayReport, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(header, &["k", "eigenvalue", "in_fit"])?;
    for (i, &v) in decay.eigenvalues.iter().enumerate() {
        let k = i + 1;
        t.row(vec![
            k.to_string(),
            format_number(v),
            u8::from(k >= decay.k_min && k <= decay.k_max).to_string(),
        ])?;
    }
    t.finish()
}

/// Columns `block, index, value`, blocks in the order `d, c, l, eta`.
pub fn coefficients_csv(coefs: &Coefficients, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(header, &["block", "index", "value"])?;
    let blocks = [
        ("d", coefs.d.as_ref()),
        ("c", Some(&coefs.c)),
        ("l", coefs.l.as_ref()),
        ("eta", Some(&coefs.eta)),
    ];
    for (name, block) in blocks {
        for (i, v) in block.into_iter().flatten().enumerate() {
            t.row(vec![name.to_string(), i.to_string(), format_number(*v)])?;
        }
    }
    t.finish()
}

/// Columns `index, y, fitted, residual`.
pub fn fitted_csv(y: &[f64], fitted: &[f64], header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(header, &["index", "y", "fitted", "residual"])?;
    for (i, (a, b)) in y.iter().zip(fitted).enumerate() {
        t.row(vec![
            i.to_string(),
            format_number(*a),
            format_number(*b),
            format_number(a - b),
        ])?;
    }
    t.finish()
}

/// Columns `t, beta`.
pub fn slope_csv(slope: &Curve, header: &ReportHeader) -> Result<String> {
    let mut t = Table::new(header, &["t", "beta"])?;
    let grid = slope.grid();
    for (i, v) in slope.values().iter().enumerate() {
        t.row(vec![format_number(grid.point(i)), format_number(*v)])?;
    }
    t.finish()
}

/// The penalties a fit used and how they were chosen.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub variant: Variant,
    pub lambda: f64,
    pub xi: f64,
    /// `None` when the penalties were fixed in the configuration.
    pub gcv: Option<f64>,
    pub trace_h: Option<f64>,
    pub effective_dof: Option<f64>,
    pub n: usize,
}

impl Selection {
    pub fn from_grid(grid: &GcvGrid, variant: Variant, n: usize) -> Self {
        Selection {
            variant,
            lambda: grid.best_lambda(),
            xi: grid.best_xi(),
            gcv: Some(grid.best_score()),
            trace_h: Some(grid.traces[grid.best]),
            effective_dof: Some(grid.effective_dof[grid.best]),
            n,
        }
    }
}

pub fn selection_json(selection: &Selection, header: &ReportHeader) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        header: &'a ReportHeader,
        selection: &'a Selection,
    }
    let mut s = serde_json::to_string_pretty(&Doc { header, selection })
        .map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct Summary<'a> {
    header: &'a ReportHeader,
    config: &'a crate::simulation::ExperimentConfig,
    cells: &'a [CellSummary],
    slopes: &'a [crate::simulation::RateSlope],
}

pub fn summary_json(report: &ScenarioReport, header: &ReportHeader) -> Result<String> {
    let s = Summary {
        header,
        config: &report.config,
        cells: &report.cells,
        slopes: &report.slopes,
    };
    serde_json::to_string_pretty(&s).map_err(|e| Error::Config(e.to_string()))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const PANEL_W: f64 = 440.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 40.0;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn series(report: &ScenarioReport, component: Component) -> Vec<Series> {
    let vary1 = report.config.upsilon1.len() > 1;
    let vary2 = report.config.upsilon2.len() > 1;
    let mut out = Vec::new();
    for &u1 in &report.config.upsilon1 {
        for &u2 in &report.config.upsilon2 {
            let mut points: Vec<(f64, f64)> = report
                .cells
                .iter()
                .filter(|c| c.upsilon1 == u1 && c.upsilon2 == u2)
                .filter_map(|c| {
                    let v = match component {
                        Component::Beta => c.beta_error_mean,
                        Component::G => c.g_error_mean,
                    }?;
                    (v > 0.0 && v.is_finite()).then_some((c.n as f64, v))
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = match (vary1, vary2) {
                (true, false) => format!("υ₁ = {u1}"),
                (false, true) => format!("υ₂ = {u2}"),
                _ => format!("υ₁ = {u1}, υ₂ = {u2}"),
            };
            out.push(Series { label, points });
        }
    }
    out
}

/// Log-scale axis bounds padded to include at least one decade tick.
fn log_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (lo, hi) = (lo.log10(), hi.log10());
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.08 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn panel(svg: &mut String, x0: f64, title: &str, data: &[Series], x_ticks: &[f64]) {
    let (px, py) = (x0 + MARGIN_L, MARGIN_T);
    let _ = writeln!(
        svg,
        r##"<rect x="{px:.2}" y="{py:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="15">{title}</text>"#,
        px + PANEL_W / 2.0,
        py - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">n</text>"#,
        px + PANEL_W / 2.0,
        py + PANEL_H + 38.0
    );
    if data.is_empty() {
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" fill="#777">not estimated in this scenario</text>"##,
            px + PANEL_W / 2.0,
            py + PANEL_H / 2.0
        );
        return;
    }
    let (xl, xh) = log_bounds(x_ticks.iter().copied());
    let (yl, yh) = log_bounds(data.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| px + (x.log10() - xl) / (xh - xl) * PANEL_W;
    let sy = |y: f64| py + PANEL_H - (y.log10() - yl) / (yh - yl) * PANEL_H;
    for &n in x_ticks {
        let x = sx(n);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{n}</text>"##,
            py + PANEL_H,
            py + PANEL_H + 5.0,
            py + PANEL_H + 18.0
        );
    }
    let mut ticks: Vec<f64> = (yl.ceil() as i32..=yh.floor() as i32)
        .map(|e| 10f64.powi(e))
        .collect();
    if ticks.len() < 2 {
        for m in [2.0, 5.0] {
            for e in (yl.floor() as i32)..=(yh.ceil() as i32) {
                let v = m * 10f64.powi(e);
                if v.log10() >= yl && v.log10() <= yh {
                    ticks.push(v);
                }
            }
        }
        ticks.sort_by(f64::total_cmp);
    }
    for v in ticks {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{px:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{v:e}</text>"##,
            px - 5.0,
            px - 8.0,
            y + 4.0
        );
    }
    for (k, s) in data.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.2" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = py + 16.0 + 16.0 * k as f64;
        let lx = px + PANEL_W - 130.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}" font-size="11">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0,
            s.label
        );
    }
}

/// Two log-log panels of mean test error against `n`: functional part left,
/// nonparametric part right, one curve per smoothness level.
pub fn error_plot_svg(report: &ScenarioReport, header: &ReportHeader) -> String {
    let width = 2.0 * (MARGIN_L + PANEL_W) + 30.0;
    let height = MARGIN_T + PANEL_H + 60.0;
    let mut ns: Vec<f64> = report.cells.iter().map(|c| c.n as f64).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, "<!-- {} -->", header.comment());
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(
        &mut svg,
        0.0,
        "‖β̂ − β⁰‖² (test mean)",
        &series(report, Component::Beta),
        &ns,
    );
    panel(
        &mut svg,
        MARGIN_L + PANEL_W + 30.0,
        "‖ĝ − g⁰‖² (test mean)",
        &series(report, Component::G),
        &ns,
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write every experiment artifact into `dir` and return the paths written.
pub fn write_experiment(
    dir: &Path,
    report: &ScenarioReport,
    header: &ReportHeader,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("replicates.csv", replicates_csv(report, header)?),
        ("cells.csv", cells_csv(report, header)?),
        ("slopes.csv", slopes_csv(report, header)?),
        ("summary.json", summary_json(report, header)?),
        ("errors.svg", error_plot_svg(report, header)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write_text(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

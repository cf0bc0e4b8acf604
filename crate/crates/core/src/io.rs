//! Plain-text data files.
//!
//! All files are comma-separated, headerless except where noted, and may
//! contain `#` comment lines.
//!
//! * Curves: the first data row lists the grid points `t_1 … t_M` (an odd,
//!   uniform grid over `[0, 1]`); each following row is one curve sampled
//!   on that grid.
//! * Scalar covariates: one row of `p` values per observation.
//! * Responses: one value per row.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functional_data::{CurveSet, Grid};

const GRID_TOL: f64 = 1e-9;

struct Row {
    line: usize,
    fields: Vec<f64>,
}

fn schema(path: &Path, row: usize, column: Option<usize>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        row,
        column,
        message: message.into(),
    }
}

fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            schema(path, line, None, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let fields = record
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let v: f64 = f.parse().map_err(|_| {
                    schema(path, line, Some(j + 1), format!("`{f}` is not a number"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(schema(path, line, Some(j + 1), "value is not finite"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn rectangular(path: &Path, rows: &[Row], width: usize) -> Result<()> {
    for r in rows {
        if r.fields.len() != width {
            return Err(schema(
                path,
                r.line,
                None,
                format!("expected {width} fields, found {}", r.fields.len()),
            ));
        }
    }
    Ok(())
}

/// Read curves sampled on a common grid.
pub fn read_curves(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| schema(path, 1, None, "missing grid row"))?;
    let m = header.fields.len();
    let grid = Grid::new(m).map_err(|e| schema(path, header.line, None, e.to_string()))?;
    for (j, &t) in header.fields.iter().enumerate() {
        if (t - grid.point(j)).abs() > GRID_TOL {
            return Err(schema(
                path,
                header.line,
                Some(j + 1),
                format!(
                    "grid point {t} is not {} (grid must be uniform on [0, 1])",
                    grid.point(j)
                ),
            ));
        }
    }
    if body.is_empty() {
        return Err(schema(
            path,
            header.line,
            None,
            "no curves after the grid row",
        ));
    }
    rectangular(path, body, m)?;
    let values = DMatrix::from_fn(m, body.len(), |i, j| body[j].fields[i]);
    CurveSet::from_matrix(grid, values)
}

/// Read one row of scalar covariates per observation.
pub fn read_covariates(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let first = rows
        .first()
        .ok_or_else(|| schema(path, 1, None, "file has no rows"))?;
    rectangular(path, &rows, first.fields.len())?;
    Ok(rows.into_iter().map(|r| r.fields).collect())
}

/// Read a single column of responses.
pub fn read_responses(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(schema(path, 1, None, "file has no rows"));
    }
    rectangular(path, &rows, 1)?;
    Ok(rows.into_iter().map(|r| r.fields[0]).collect())
}

/// Check that the three input files describe the same observations.
pub fn check_row_counts(files: [(&Path, usize); 3]) -> Result<()> {
    let (ref_path, ref_count) = files[0];
    for (path, count) in &files[1..] {
        if *count != ref_count {
            return Err(Error::InvalidArgument(format!(
                "row count mismatch: {} has {ref_count} observations but {} has {count}",
                ref_path.display(),
                path.display()
            )));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<'a>(path: &Path, rows: impl Iterator<Item = Vec<f64>> + 'a) -> Result<()> {
    let mut out = std::io::BufWriter::new(create(path)?);
    for row in rows {
        let line: Vec<String> = row.into_iter().map(format_number).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write curves in the format read by [`read_curves`].
pub fn write_curves(path: impl AsRef<Path>, curves: &CurveSet) -> Result<()> {
    let grid = curves.grid();
    let m = curves.matrix();
    write_rows(
        path.as_ref(),
        std::iter::once(grid.points())
            .chain((0..curves.len()).map(|j| m.column(j).iter().copied().collect())),
    )
}

pub fn write_covariates(path: impl AsRef<Path>, z: &[Vec<f64>]) -> Result<()> {
    write_rows(path.as_ref(), z.iter().cloned())
}

pub fn write_responses(path: impl AsRef<Path>, y: &[f64]) -> Result<()> {
    write_rows(path.as_ref(), y.iter().map(|v| vec![*v]))
}

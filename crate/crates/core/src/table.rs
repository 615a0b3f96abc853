//! Tabulated coefficient functions read from CSV.

use std::path::Path;

use crate::error::{FkError, Result};

/// Piecewise-linear function of one variable. Clamped outside the table.
#[derive(Debug, Clone)]
pub struct Table1 {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Table1 {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.is_empty() || points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(FkError::GridMismatch(
                "one-dimensional table needs distinct abscissae".into(),
            ));
        }
        let (xs, ys) = points.into_iter().unzip();
        Ok(Self { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, w) = locate(&self.xs, x);
        self.ys[i] * (1.0 - w) + self.ys.get(i + 1).map_or(0.0, |y| y * w)
    }

    /// `∫_{x_0}^{x} f`, exact for the linear interpolant (constant extension
    /// beyond the last abscissa).
    pub fn integral_to(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.xs.len() {
            let x0 = self.xs[k];
            if x <= x0 {
                break;
            }
            let x1 = self.xs.get(k + 1).copied().unwrap_or(f64::INFINITY).min(x);
            acc += 0.5 * (self.eval(x0) + self.eval(x1)) * (x1 - x0);
        }
        acc
    }

    pub fn load(path: &Path, column: &str) -> Result<Self> {
        let rows = read_columns(path, 2)?;
        let points = rows.into_iter().map(|r| (r[0], r[1])).collect();
        Self::new(points).map_err(|e| parse_err(path, format!("{column}: {e}")))
    }
}

/// Bilinear interpolant on a rectangular grid. Clamped outside the grid.
#[derive(Debug, Clone)]
pub struct Table2 {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major over (x, y).
    values: Vec<f64>,
}

impl Table2 {
    pub fn new(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        if xs.len() * ys.len() != points.len() {
            return Err(FkError::GridMismatch(format!(
                "table is not a full rectangular grid: {} points for {}x{} axes",
                points.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut values = vec![f64::NAN; points.len()];
        for (x, y, v) in points {
            let i = xs
                .binary_search_by(|p| p.total_cmp(&x))
                .expect("axis built from points");
            let j = ys
                .binary_search_by(|p| p.total_cmp(&y))
                .expect("axis built from points");
            values[i * ys.len() + j] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(FkError::GridMismatch("duplicate table entries".into()));
        }
        Ok(Self { xs, ys, values })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, wx) = locate(&self.xs, x);
        let (j, wy) = locate(&self.ys, y);
        let at = |i: usize, j: usize| {
            let i = i.min(self.xs.len() - 1);
            let j = j.min(self.ys.len() - 1);
            self.values[i * self.ys.len() + j]
        };
        (1.0 - wx) * ((1.0 - wy) * at(i, j) + wy * at(i, j + 1))
            + wx * ((1.0 - wy) * at(i + 1, j) + wy * at(i + 1, j + 1))
    }

    /// Smallest tabulated value and its location.
    pub fn min_entry(&self) -> (f64, f64, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty table");
        (self.xs[k / self.ys.len()], self.ys[k % self.ys.len()], *v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rows = read_columns(path, 3)?;
        let points = rows.into_iter().map(|r| (r[0], r[1], r[2])).collect();
        Self::new(points).map_err(|e| parse_err(path, e.to_string()))
    }
}

/// Index of the left bracket and the interpolation weight, clamped.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    let last = axis.len() - 1;
    if x >= axis[last] {
        return (last, 0.0);
    }
    let i = axis.partition_point(|&p| p <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

fn parse_err(path: &Path, message: String) -> FkError {
    FkError::Parse {
        path: path.to_path_buf(),
        message,
    }
}

fn read_columns(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() != width {
            return Err(parse_err(
                path,
                format!(
                    "row {} has {} columns, expected {width}",
                    line + 2,
                    record.len()
                ),
            ));
        }
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

//! Macroscopic observables, truncation-error study and CSV export.
//!
//! All CSV output is row-major with a fixed column order and floats printed
//! with 17 significant digits, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::basis::{build_basis, BasisSet};
use crate::error::{FkError, Result};
use crate::model::{forward_transform, preset, x_grid, ModelConfig};
use crate::stepper::{project_function, reconstruct_slice, DensityField, LineProjector, Solution};

/// Total population `p(t)` at a sequence of times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

impl ObservableSeries {
    /// `(t, p)` at the largest finite value of `p`.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.t
            .iter()
            .zip(&self.p)
            .filter(|(_, p)| p.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&t, &p)| (t, p))
    }

    /// `sup_t |p(t) - q(t)|` over the times both series share.
    pub fn sup_distance(&self, other: &ObservableSeries) -> f64 {
        let tol = 1e-9;
        let mut k = 0;
        let mut sup: f64 = 0.0;
        for (t, p) in self.t.iter().zip(&self.p) {
            while k < other.t.len() && other.t[k] < t - tol {
                k += 1;
            }
            if k < other.t.len() && (other.t[k] - t).abs() <= tol {
                sup = sup.max((p - other.p[k]).abs());
            }
        }
        sup
    }
}

/// Composite trapezoid weights on arbitrary sorted nodes.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; nodes.len()];
    for k in 1..nodes.len() {
        let h = nodes[k] - nodes[k - 1];
        w[k - 1] += 0.5 * h;
        w[k] += 0.5 * h;
    }
    w
}

fn integrate_slice(slice: &[f64], wa: &[f64], wx: &[f64]) -> f64 {
    let n_x = wx.len();
    wa.iter()
        .enumerate()
        .map(|(j, waj)| {
            waj * slice[j * n_x..(j + 1) * n_x]
                .iter()
                .zip(wx)
                .map(|(u, w)| u * w)
                .sum::<f64>()
        })
        .sum()
}

/// `p(t) = ∫∫ u da dx` by the trapezoidal rule over the retained age nodes.
pub fn total_population(field: &DensityField) -> ObservableSeries {
    let wa = trapezoid_weights(&field.a_nodes);
    let wx = trapezoid_weights(&field.x_nodes);
    ObservableSeries {
        t: field.t_values.clone(),
        p: field
            .slices
            .iter()
            .map(|s| integrate_slice(s, &wa, &wx))
            .collect(),
    }
}

/// `p(t)` at every time level of a solution, reconstructing one slice at a
/// time. Stops before the level of a blow-up.
pub fn population_series(
    sol: &Solution,
    basis: &BasisSet,
    cfg: &ModelConfig,
) -> Result<ObservableSeries> {
    let grid = &sol.grid;
    let projector = LineProjector::new(basis, cfg.dx, Default::default())?;
    let wa = trapezoid_weights(&grid.a_nodes);
    let wx = trapezoid_weights(&grid.x_nodes);
    let last = sol.blowup.as_ref().map_or(grid.n_t(), |b| b.i);
    let mut series = ObservableSeries {
        t: Vec::with_capacity(last),
        p: Vec::with_capacity(last),
    };
    for i in 0..last {
        let slice = reconstruct_slice(&sol.field, &projector, cfg, grid, i)?;
        series.t.push(grid.t_nodes[i]);
        series.p.push(integrate_slice(&slice, &wa, &wx));
    }
    Ok(series)
}

/// `max |ref - trunc| / max |ref| × 100`.
pub fn e_max(reference: &[f64], truncated: &[f64]) -> Result<f64> {
    if reference.len() != truncated.len() {
        return Err(FkError::GridMismatch(format!(
            "fields have {} and {} entries",
            reference.len(),
            truncated.len()
        )));
    }
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(FkError::ZeroReference);
    }
    let diff = reference
        .iter()
        .zip(truncated)
        .fold(0.0f64, |m, (r, t)| m.max((r - t).abs()));
    Ok(diff / scale * 100.0)
}

/// Age grid used for the truncation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmaxGrid {
    /// 41 uniform nodes `j a†/41`, `j = 0..=40`.
    #[default]
    Uniform41,
    /// Nodes `j Δt` with `Δt = 0.05`, strictly below `a†`.
    TimeStep,
}

impl EmaxGrid {
    pub fn ages(self, a_max: f64) -> Vec<f64> {
        match self {
            EmaxGrid::Uniform41 => (0..41).map(|j| j as f64 * a_max / 41.0).collect(),
            EmaxGrid::TimeStep => {
                let dt = 0.05;
                let n = (a_max / dt - 1e-9).ceil() as usize;
                (0..n).map(|j| j as f64 * dt).collect()
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform41" | "paper41" => Some(EmaxGrid::Uniform41),
            "dt" => Some(EmaxGrid::TimeStep),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRow {
    pub example: u32,
    pub cutoff: usize,
    pub e_max_percent: f64,
}

/// Subintervals (halved) of the composite Simpson rule projecting the
/// closed-form transformed data.
const STUDY_HALF_PANELS: usize = 1000;

/// Relative max error between transformed initial data and its truncated
/// series, for each cut-off in `cutoffs`.
pub fn truncation_error(cfg: &ModelConfig, cutoff: usize, grid: EmaxGrid) -> Result<f64> {
    let basis = build_basis(cutoff, cfg.ell)?;
    let xs = x_grid(cfg.ell, cfg.dx)?;
    let mut truth = Vec::new();
    let mut approx = Vec::new();
    for a in grid.ages(cfg.a_max) {
        for &x in &xs {
            truth.push(forward_transform(cfg.u0.eval(a, x), a, cfg)?);
        }
        let transformed = |x: f64| forward_transform(cfg.u0.eval(a, x), a, cfg).unwrap_or(f64::NAN);
        let coeffs = project_function(transformed, &basis, STUDY_HALF_PANELS);
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FkError::NonPositiveDensity(f64::NAN));
        }
        for &x in &xs {
            approx.push(
                basis
                    .polys()
                    .iter()
                    .zip(coeffs.iter())
                    .map(|(p, c)| c * p.eval(x) * x.exp())
                    .sum::<f64>(),
            );
        }
    }
    e_max(&truth, &approx)
}

pub fn truncation_study(
    example_id: u32,
    cutoffs: &[usize],
    grid: EmaxGrid,
) -> Result<Vec<TruncationRow>> {
    let cfg = preset(example_id)?;
    cutoffs
        .iter()
        .map(|&n| {
            Ok(TruncationRow {
                example: example_id,
                cutoff: n,
                e_max_percent: truncation_error(&cfg, n, grid)?,
            })
        })
        .collect()
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub example: String,
    pub steps: usize,
    pub cutoff: usize,
    pub dt: f64,
    pub c: f64,
    pub s_inv_frob: f64,
    pub p_sum: f64,
    pub dt_admissible: bool,
    pub max_norm_observed: f64,
    pub bound_2c: f64,
    pub amplification: f64,
    /// `"i:j"` of the first blown-up node, or `"none"`.
    pub blowup_node: String,
}

impl SummaryRow {
    pub fn from_solution(cfg: &ModelConfig, sol: &Solution) -> Self {
        let r = &sol.report;
        Self {
            example: cfg
                .example
                .map_or_else(|| "config".to_string(), |e| e.to_string()),
            steps: cfg.steps,
            cutoff: cfg.cutoff,
            dt: sol.grid.dt,
            c: r.c,
            s_inv_frob: r.s_inv_frob,
            p_sum: r.p_sum,
            dt_admissible: r.dt_admissible,
            max_norm_observed: r.max_norm_observed,
            bound_2c: r.bound_2c,
            amplification: r.amplification,
            blowup_node: sol
                .blowup
                .as_ref()
                .map_or_else(|| "none".to_string(), |b| format!("{}:{}", b.i, b.j)),
        }
    }
}

pub const SUMMARY_HEADER: &str = "example,M,N,dt,C,S_inv_frob,P_sum,dt_admissible,max_norm_observed,bound_2C,amplification,blowup_node";

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| FkError::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| FkError::io(path, e))
}

/// `density_t<t>.csv` name for a time value.
pub fn density_file_name(t: f64) -> String {
    format!("density_t{t:.6}.csv")
}

/// Writes one `density_t<t>.csv` per slice; returns the paths.
pub fn export_density(field: &DensityField, dir: &Path) -> Result<Vec<PathBuf>> {
    let n_x = field.x_nodes.len();
    let mut paths = Vec::with_capacity(field.slices.len());
    for (slice, &t) in field.slices.iter().zip(&field.t_values) {
        let path = dir.join(density_file_name(t));
        write_file(&path, |out| {
            writeln!(out, "a,x,u")?;
            for (j, &a) in field.a_nodes.iter().enumerate() {
                for (l, &x) in field.x_nodes.iter().enumerate() {
                    writeln!(out, "{},{},{}", f17(a), f17(x), f17(slice[j * n_x + l]))?;
                }
            }
            Ok(())
        })?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn export_population(series: &ObservableSeries, path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(out, "t,p")?;
        for (t, p) in series.t.iter().zip(&series.p) {
            writeln!(out, "{},{}", f17(*t), f17(*p))?;
        }
        Ok(())
    })
}

pub fn export_truncation(rows: &[TruncationRow], path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(out, "example,N,E_max_percent")?;
        for r in rows {
            writeln!(out, "{},{},{}", r.example, r.cutoff, f17(r.e_max_percent))?;
        }
        Ok(())
    })
}

pub fn export_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(out, "{SUMMARY_HEADER}")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.example,
                r.steps,
                r.cutoff,
                f17(r.dt),
                f17(r.c),
                f17(r.s_inv_frob),
                f17(r.p_sum),
                r.dt_admissible,
                f17(r.max_norm_observed),
                f17(r.bound_2c),
                f17(r.amplification),
                r.blowup_node
            )?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_field(value: f64, dt: f64) -> DensityField {
        let a_nodes: Vec<f64> = (0..(12.0 / dt).round() as usize)
            .map(|j| j as f64 * dt)
            .collect();
        let x_nodes = x_grid(1.0, 0.05).unwrap();
        let n = a_nodes.len() * x_nodes.len();
        DensityField {
            t_indices: vec![0],
            t_values: vec![0.0],
            a_nodes,
            x_nodes,
            slices: vec![vec![value; n]],
        }
    }

    #[test]
    fn population_of_constant_field() {
        let dt = 0.05;
        let p = total_population(&uniform_field(1.0, dt));
        assert!((p.p[0] - 24.0 * (1.0 - dt / 12.0)).abs() < 1e-12);
        let e = 1f64.exp();
        let p = total_population(&uniform_field(e, dt));
        assert!((p.p[0] - e * 2.0 * (12.0 - dt)).abs() < 1e-11);
    }

    #[test]
    fn e_max_basics() {
        assert_eq!(e_max(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        assert!((e_max(&[1.0, -2.0], &[1.0, -1.0]).unwrap() - 50.0).abs() < 1e-12);
        assert!(matches!(
            e_max(&[0.0, 0.0], &[1.0, 0.0]),
            Err(FkError::ZeroReference)
        ));
    }

    #[test]
    fn emax_grids() {
        let a = EmaxGrid::Uniform41.ages(12.0);
        assert_eq!(a.len(), 41);
        assert!((a[40] - (12.0 - 12.0 / 41.0)).abs() < 1e-12);
        let a = EmaxGrid::TimeStep.ages(12.0);
        assert_eq!(a.len(), 240);
        assert_eq!(EmaxGrid::parse("dt"), Some(EmaxGrid::TimeStep));
        assert_eq!(EmaxGrid::parse("x"), None);
    }

    #[test]
    fn peak_and_distance() {
        let s = ObservableSeries {
            t: vec![0.0, 1.0, 2.0],
            p: vec![1.0, 3.0, 2.0],
        };
        assert_eq!(s.peak(), Some((1.0, 3.0)));
        let q = ObservableSeries {
            t: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            p: vec![1.0, 9.0, 2.5, 9.0, 2.0],
        };
        assert!((s.sup_distance(&q) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn file_names() {
        assert_eq!(density_file_name(5.0), "density_t5.000000.csv");
    }
}

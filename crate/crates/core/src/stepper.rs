//! Projection of boundary data, the explicit characteristic scheme for the
//! coefficient lattice, and reconstruction of the density.
//!
//! The lattice couples node `(i, j)` only to its diagonal ancestor
//! `(i-1, j-1)`, so each characteristic `j - i = const` evolves on its own.

use nalgebra::{DMatrix, DVector};

use crate::basis::{eval_basis, BasisSet};
use crate::error::{FkError, Result};
use crate::galerkin::{step_operators, GalerkinSystem, StepOperators};
use crate::model::{forward_transform, inverse_transform, x_grid, GridSpec, ModelConfig};
use crate::stability::{self, StabilityReport};

/// Coefficient norm above which a node is reported as blown up.
pub const BLOWUP_NORM: f64 = 1e150;

/// Composite rule used to integrate sampled data on the uniform x-grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    Trapezoid,
    /// Composite Simpson; an odd interval count closes with a 3/8 panel.
    #[default]
    Simpson,
}

/// Weights of the composite rule on `n_points` equispaced nodes.
pub fn quadrature_weights(n_points: usize, h: f64, rule: QuadratureRule) -> Vec<f64> {
    let intervals = n_points.saturating_sub(1);
    let mut w = vec![0.0; n_points];
    if intervals == 0 {
        return w;
    }
    let trapezoid = |w: &mut [f64]| {
        for k in 0..intervals {
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
    };
    match rule {
        QuadratureRule::Trapezoid => trapezoid(&mut w),
        QuadratureRule::Simpson if intervals < 2 => trapezoid(&mut w),
        QuadratureRule::Simpson => {
            let simpson_end = if intervals.is_multiple_of(2) {
                intervals
            } else {
                intervals - 3
            };
            for k in (0..simpson_end).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if simpson_end != intervals {
                let k = simpson_end;
                for (off, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
                    w[k + off] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

/// Projects samples on the symmetric x-grid onto the basis.
#[derive(Debug, Clone)]
pub struct LineProjector {
    x_nodes: Vec<f64>,
    psi: DMatrix<f64>,
    /// `psi` with each column scaled by its quadrature weight.
    weighted: DMatrix<f64>,
}

impl LineProjector {
    pub fn new(basis: &BasisSet, dx: f64, rule: QuadratureRule) -> Result<Self> {
        let x_nodes = x_grid(basis.ell(), dx)?;
        let h = 2.0 * basis.ell() / (x_nodes.len() - 1) as f64;
        let psi = eval_basis(basis, 0, &x_nodes)?;
        let w = quadrature_weights(x_nodes.len(), h, rule);
        let mut weighted = psi.clone();
        for (l, wl) in w.iter().enumerate() {
            weighted.column_mut(l).scale_mut(*wl);
        }
        Ok(Self {
            x_nodes,
            psi,
            weighted,
        })
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    /// Basis values, `N × n_x`.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// `(⟨v, Ψ_n⟩)_n` from samples of `v` on the grid.
    pub fn project(&self, values: &[f64]) -> Result<DVector<f64>> {
        if values.len() != self.x_nodes.len() {
            return Err(FkError::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                self.x_nodes.len()
            )));
        }
        Ok(&self.weighted * DVector::from_column_slice(values))
    }

    /// `Σ_n c_n Ψ_n(x_l)` at every grid node.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (self.psi.transpose() * c).as_slice().to_vec()
    }
}

/// Projection of grid samples with the chosen rule.
pub fn project_line(
    values: &[f64],
    basis: &BasisSet,
    dx: f64,
    rule: QuadratureRule,
) -> Result<DVector<f64>> {
    LineProjector::new(basis, dx, rule)?.project(values)
}

/// Projection of a function given in closed form, by composite Simpson on
/// `2 * half_panels` subintervals.
pub fn project_function(
    f: impl Fn(f64) -> f64,
    basis: &BasisSet,
    half_panels: usize,
) -> DVector<f64> {
    let ell = basis.ell();
    let n = 2 * half_panels.max(1);
    let h = 2.0 * ell / n as f64;
    let w = quadrature_weights(n + 1, h, QuadratureRule::Simpson);
    let xs: Vec<f64> = (0..=n).map(|l| -ell + l as f64 * h).collect();
    let mut out = DVector::zeros(basis.cutoff());
    for (idx, p) in basis.polys().iter().enumerate() {
        out[idx] = xs
            .iter()
            .zip(&w)
            .map(|(&x, &wl)| wl * f(x) * p.eval(x) * x.exp())
            .sum();
    }
    out
}

/// One explicit step along the characteristic:
/// `S V = S V_prev + dt (𝕂 V_prev + (V_prevᵀ 𝔾_m V_prev)_m)`.
///
/// Back substitution is applied to the increment `S ΔV = dt F` so that
/// `S V_prev` is never formed; `S` is badly conditioned for larger `N`.
pub fn step(
    v_prev: &DVector<f64>,
    ops: &StepOperators,
    sys: &GalerkinSystem,
    dt: f64,
) -> DVector<f64> {
    if dt == 0.0 {
        return v_prev.clone();
    }
    v_prev + sys.solve_s(&(ops.apply(v_prev) * dt))
}

/// `V_j^i ∈ R^N` for `0 ≤ i ≤ M`, `0 ≤ j < J`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    n_t: usize,
    n_a: usize,
    cutoff: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn zeros(n_t: usize, n_a: usize, cutoff: usize) -> Self {
        Self {
            n_t,
            n_a,
            cutoff,
            values: vec![0.0; n_t * n_a * cutoff],
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        assert!(i < self.n_t && j < self.n_a, "node ({i}, {j}) out of range");
        (i * self.n_a + j) * self.cutoff
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.cutoff]
    }

    pub fn set(&mut self, i: usize, j: usize, v: &[f64]) {
        let o = self.offset(i, j);
        self.values[o..o + self.cutoff].copy_from_slice(v);
    }

    pub fn vector(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_column_slice(self.get(i, j))
    }

    pub fn norm(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Nodes on the `i = 0` row and the `j = 0` column.
    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_a)
            .map(|j| (0, j))
            .chain((1..self.n_t).map(|i| (i, 0)))
    }
}

/// Node where the scheme produced a non-finite or runaway coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    pub i: usize,
    pub j: usize,
    pub norm: f64,
}

impl BlowUp {
    pub fn into_error(self) -> FkError {
        FkError::BlowUp {
            i: self.i,
            j: self.j,
            detail: format!("|V|_2 = {:e}", self.norm),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub rule: QuadratureRule,
}

/// Output of [`solve`]. Stepping stops at the first blow-up; later nodes are
/// left as NaN.
#[derive(Debug, Clone)]
pub struct Solution {
    pub grid: GridSpec,
    pub field: CoefficientField,
    pub report: StabilityReport,
    pub blowup: Option<BlowUp>,
}

/// Precomputed coefficient values on the age axis.
struct AgeColumn {
    mu: Vec<f64>,
    survival: Vec<f64>,
}

/// Operators at node `(i, j)`.
pub fn node_operators(
    cfg: &ModelConfig,
    sys: &GalerkinSystem,
    grid: &GridSpec,
    i: usize,
    j: usize,
) -> Result<StepOperators> {
    let (t, a) = (grid.t_nodes[i], grid.a_nodes[j]);
    step_operators(
        sys,
        cfg.eval_diffusion(t, a),
        cfg.mu(a),
        cfg.survival(a),
        cfg.rho,
        cfg.kd_ratio(),
    )
}

/// Fills the boundary row and column from the transformed initial and
/// newborn data.
pub fn boundary_coefficients(
    cfg: &ModelConfig,
    grid: &GridSpec,
    projector: &LineProjector,
    cutoff: usize,
) -> Result<CoefficientField> {
    let mut field = CoefficientField::zeros(grid.n_t(), grid.n_a(), cutoff);
    let mut samples = vec![0.0; grid.n_x()];
    for (j, &a) in grid.a_nodes.iter().enumerate() {
        for (s, &x) in samples.iter_mut().zip(&grid.x_nodes) {
            *s = forward_transform(cfg.u0.eval(a, x), a, cfg)?;
        }
        field.set(0, j, projector.project(&samples)?.as_slice());
    }
    for (i, &t) in grid.t_nodes.iter().enumerate().skip(1) {
        for (s, &x) in samples.iter_mut().zip(&grid.x_nodes) {
            *s = forward_transform(cfg.u0_bar.eval(t, x), 0.0, cfg)?;
        }
        field.set(i, 0, projector.project(&samples)?.as_slice());
    }
    Ok(field)
}

/// Runs the explicit scheme over the whole lattice.
pub fn solve(
    cfg: &ModelConfig,
    basis: &BasisSet,
    sys: &GalerkinSystem,
    opts: SolveOptions,
) -> Result<Solution> {
    let grid = cfg.validate()?;
    if basis.cutoff() != cfg.cutoff || sys.cutoff() != cfg.cutoff {
        return Err(FkError::GridMismatch(format!(
            "basis has N = {}, config asks for N = {}",
            basis.cutoff(),
            cfg.cutoff
        )));
    }
    if (basis.ell() - cfg.ell).abs() > 1e-12 * cfg.ell {
        return Err(FkError::GridMismatch(
            "basis interval differs from config".into(),
        ));
    }
    let projector = LineProjector::new(basis, cfg.dx, opts.rule)?;
    let mut field = boundary_coefficients(cfg, &grid, &projector, cfg.cutoff)?;

    let ages = AgeColumn {
        mu: grid.a_nodes.iter().map(|&a| cfg.mu(a)).collect(),
        survival: grid.a_nodes.iter().map(|&a| cfg.survival(a)).collect(),
    };
    let dt = grid.dt;
    let mut p_sum = 0.0;
    let mut blowup = None;
    'outer: for i in 1..grid.n_t() {
        for j in 1..grid.n_a() {
            let (ip, jp) = (i - 1, j - 1);
            let ops = step_operators(
                sys,
                cfg.eval_diffusion(grid.t_nodes[ip], grid.a_nodes[jp]),
                ages.mu[jp],
                ages.survival[jp],
                cfg.rho,
                cfg.kd_ratio(),
            )?;
            p_sum += stability::p_bound(&ops);
            let next = step(&field.vector(ip, jp), &ops, sys, dt);
            let norm = next.norm();
            if !(norm <= BLOWUP_NORM) {
                blowup = Some(BlowUp { i, j, norm });
                break 'outer;
            }
            field.set(i, j, next.as_slice());
        }
    }
    if let Some(b) = &blowup {
        mark_unfilled(&mut field, b);
    }

    let report = stability::build_report(&field, sys, dt, p_sum);
    Ok(Solution {
        grid,
        field,
        report,
        blowup,
    })
}

/// Admissibility inputs computed without stepping: `C` from the projected
/// boundary data and `Σ P` from the operators at every ancestor node.
pub fn admissibility_precheck(
    cfg: &ModelConfig,
    basis: &BasisSet,
    sys: &GalerkinSystem,
    opts: SolveOptions,
) -> Result<stability::Precheck> {
    let grid = cfg.validate()?;
    let projector = LineProjector::new(basis, cfg.dx, opts.rule)?;
    let field = boundary_coefficients(cfg, &grid, &projector, cfg.cutoff)?;
    let c = stability::data_bound_c(&field);
    let mut p_sum = 0.0;
    for i in 0..grid.n_t() - 1 {
        for j in 0..grid.n_a() - 1 {
            p_sum += stability::p_bound(&node_operators(cfg, sys, &grid, i, j)?);
        }
    }
    Ok(stability::Precheck::new(
        c,
        sys.s_inv_frobenius(),
        p_sum,
        grid.dt,
    ))
}

fn mark_unfilled(field: &mut CoefficientField, b: &BlowUp) {
    let nan = vec![f64::NAN; field.cutoff()];
    for i in b.i..field.n_t() {
        let start = if i == b.i { b.j } else { 1 };
        for j in start..field.n_a() {
            field.set(i, j, &nan);
        }
    }
}

/// Density on the `(a, x)` grid at selected time levels.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub t_indices: Vec<usize>,
    pub t_values: Vec<f64>,
    pub a_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
    /// One `n_a × n_x` row-major slice per requested time.
    pub slices: Vec<Vec<f64>>,
}

impl DensityField {
    pub fn at(&self, slice: usize, j: usize, l: usize) -> f64 {
        self.slices[slice][j * self.x_nodes.len() + l]
    }
}

/// Density slice `u(t_i, a_j, x_l)` from the coefficients of one time level.
pub fn reconstruct_slice(
    field: &CoefficientField,
    projector: &LineProjector,
    cfg: &ModelConfig,
    grid: &GridSpec,
    i: usize,
) -> Result<Vec<f64>> {
    let n_x = grid.n_x();
    let mut out = Vec::with_capacity(grid.n_a() * n_x);
    for (j, &a) in grid.a_nodes.iter().enumerate() {
        let v = projector.synthesize(field.get(i, j));
        for (l, vl) in v.into_iter().enumerate() {
            let u = inverse_transform(vl, a, cfg).map_err(|e| FkError::BlowUp {
                i,
                j,
                detail: format!("{e} at x = {}", grid.x_nodes[l]),
            })?;
            out.push(u);
        }
    }
    Ok(out)
}

/// `u = e^{𝔎/d} exp(Π(a) Σ_n v_n Ψ_n(x))` at the requested time indices.
pub fn reconstruct(
    field: &CoefficientField,
    basis: &BasisSet,
    cfg: &ModelConfig,
    grid: &GridSpec,
    times: &[usize],
) -> Result<DensityField> {
    let projector = LineProjector::new(basis, cfg.dx, QuadratureRule::default())?;
    let mut slices = Vec::with_capacity(times.len());
    for &i in times {
        if i >= grid.n_t() {
            return Err(FkError::GridMismatch(format!(
                "time index {i} beyond M = {}",
                grid.n_t() - 1
            )));
        }
        slices.push(reconstruct_slice(field, &projector, cfg, grid, i)?);
    }
    Ok(DensityField {
        t_indices: times.to_vec(),
        t_values: times.iter().map(|&i| grid.t_nodes[i]).collect(),
        a_nodes: grid.a_nodes.clone(),
        x_nodes: grid.x_nodes.clone(),
        slices,
    })
}

/// Index of the lattice time closest to `t`.
pub fn time_index(grid: &GridSpec, t: f64) -> Result<usize> {
    let i = (t / grid.dt).round();
    if i < 0.0 || i as usize >= grid.n_t() || (i * grid.dt - t).abs() > 0.5 * grid.dt * (1.0 + 1e-9)
    {
        return Err(FkError::GridMismatch(format!("time {t} outside [0, T]")));
    }
    Ok(i as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::galerkin::assemble_structure;

    #[test]
    fn weights_integrate_polynomials() {
        let h = 0.05;
        for (n, rule) in [(41, QuadratureRule::Simpson), (42, QuadratureRule::Simpson)] {
            let w = quadrature_weights(n, h, rule);
            let xs: Vec<f64> = (0..n).map(|l| l as f64 * h).collect();
            let b = (n - 1) as f64 * h;
            let q: f64 = xs.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
            assert!((q - b.powi(4) / 4.0).abs() < 1e-12, "{rule:?} n={n}");
        }
        let w = quadrature_weights(41, h, QuadratureRule::Trapezoid);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert_eq!(w[0], 0.025);
    }

    #[test]
    fn projection_of_basis_element() {
        let basis = build_basis(6, 1.0).unwrap();
        let proj = LineProjector::new(&basis, 0.05, QuadratureRule::Simpson).unwrap();
        let samples: Vec<f64> = proj
            .x_nodes()
            .iter()
            .map(|&x| basis.value(0, 0, x))
            .collect();
        let c = proj.project(&samples).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-5);
        assert!(c.iter().skip(1).all(|v| v.abs() < 5e-4));
        let zero = proj.project(&vec![0.0; 41]).unwrap();
        assert_eq!(zero.amax(), 0.0);
        assert!(proj.project(&[1.0; 40]).is_err());
    }

    #[test]
    fn step_scalar_by_hand() {
        let sys = assemble_structure(&build_basis(1, 1.0).unwrap()).unwrap();
        let ops = StepOperators {
            k_mat: DMatrix::from_element(1, 1, 1.1),
            g_tensors: vec![DMatrix::from_element(1, 1, 1.9338)],
        };
        let v = step(&DVector::from_element(1, 1.0), &ops, &sys, 0.1);
        assert!((v[0] - 1.30338).abs() < 1e-12);
    }

    #[test]
    fn zero_operators_or_dt_leave_state_unchanged() {
        let sys = assemble_structure(&build_basis(4, 1.0).unwrap()).unwrap();
        let v0 = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let zero = step_operators(&sys, 0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((step(&v0, &zero, &sys, 0.7) - &v0).amax() < 1e-12);
        let busy = step_operators(&sys, 0.4, 0.2, 0.5, 1.0, 1.0).unwrap();
        assert!((step(&v0, &busy, &sys, 0.0) - &v0).amax() < 1e-12);
    }

    #[test]
    fn time_lookup() {
        let cfg = crate::model::preset(1).unwrap();
        let grid = cfg.validate().unwrap();
        assert_eq!(time_index(&grid, 2.5).unwrap(), 50);
        assert_eq!(time_index(&grid, 10.0).unwrap(), 200);
        assert!(time_index(&grid, 10.5).is_err());
    }
}

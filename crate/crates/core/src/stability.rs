//! Runtime counterparts of the boundedness and stability estimates.

use nalgebra::DMatrix;

use crate::error::{FkError, Result};
use crate::galerkin::{GalerkinSystem, StepOperators};
use crate::stepper::CoefficientField;

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `P = |𝕂|_F + Σ_m |𝔾_m|_F`.
pub fn p_bound(ops: &StepOperators) -> f64 {
    frobenius(&ops.k_mat) + ops.g_tensors.iter().map(frobenius).sum::<f64>()
}

/// Largest `|V|_2` over the `i = 0` row and the `j = 0` column.
pub fn data_bound_c(field: &CoefficientField) -> f64 {
    field
        .boundary_nodes()
        .map(|(i, j)| field.norm(i, j))
        .fold(0.0, f64::max)
}

/// `ln((C+1)/(C+½))`.
pub fn admissibility_threshold(c: f64) -> f64 {
    ((c + 1.0) / (c + 0.5)).ln()
}

/// `dt |S⁻¹|_F Σ P ≤ ln((C+1)/(C+½))`.
pub fn dt_admissible(dt: f64, s_inv_frob: f64, p_sum: f64, c: f64) -> bool {
    dt * s_inv_frob * p_sum <= admissibility_threshold(c)
}

/// `Φ(f) = ln(2f/(f+1))` for `f > 0`.
pub fn phi(f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(FkError::Domain {
            name: "phi",
            value: f,
            domain: "(0, inf)",
        });
    }
    Ok((2.0 * f / (f + 1.0)).ln())
}

/// `Φ⁻¹(g) = 1/(2e^{-g} - 1)`, the inverse of [`phi`] on `(-∞, ln 2)`.
pub fn phi_inv(g: f64) -> Result<f64> {
    if !(g < std::f64::consts::LN_2) {
        return Err(FkError::Domain {
            name: "phi_inv",
            value: g,
            domain: "(-inf, ln 2)",
        });
    }
    Ok(1.0 / (2.0 * (-g).exp() - 1.0))
}

/// `1 + (1 + 4C) ln((C+1)/(C+½))`.
pub fn amplification(c: f64) -> f64 {
    1.0 + (1.0 + 4.0 * c) * admissibility_threshold(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub max_norm_observed: f64,
    pub bound_2c: f64,
    pub within_bound: bool,
}

/// Largest finite `|V_j^i|_2` over the lattice against the `2C` ball.
pub fn monitor(field: &CoefficientField, c: f64) -> Monitor {
    let mut max_norm: f64 = 0.0;
    let mut all_finite = true;
    for i in 0..field.n_t() {
        for j in 0..field.n_a() {
            let n = field.norm(i, j);
            if n.is_finite() {
                max_norm = max_norm.max(n);
            } else {
                all_finite = false;
            }
        }
    }
    Monitor {
        max_norm_observed: max_norm,
        bound_2c: 2.0 * c,
        within_bound: all_finite && max_norm <= 2.0 * c,
    }
}

/// Diagnostics attached to every solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub c: f64,
    pub s_inv_frob: f64,
    /// `Σ P_j^i` over every node used as an ancestor.
    pub p_sum: f64,
    pub dt: f64,
    /// `dt |S⁻¹|_F Σ P`.
    pub admissibility_lhs: f64,
    pub admissibility_threshold: f64,
    pub dt_admissible: bool,
    pub max_norm_observed: f64,
    pub bound_2c: f64,
    pub within_bound: bool,
    pub amplification: f64,
}

impl StabilityReport {
    /// `threshold / lhs`; above 1 means the step size satisfies the condition.
    pub fn margin(&self) -> f64 {
        self.admissibility_threshold / self.admissibility_lhs
    }
}

/// The `Δt` condition evaluated before any stepping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precheck {
    pub c: f64,
    pub s_inv_frob: f64,
    pub p_sum: f64,
    pub dt: f64,
    pub lhs: f64,
    pub threshold: f64,
    pub admissible: bool,
}

impl Precheck {
    pub fn new(c: f64, s_inv_frob: f64, p_sum: f64, dt: f64) -> Self {
        Self {
            c,
            s_inv_frob,
            p_sum,
            dt,
            lhs: dt * s_inv_frob * p_sum,
            threshold: admissibility_threshold(c),
            admissible: dt_admissible(dt, s_inv_frob, p_sum, c),
        }
    }

    /// Largest `Δt` the condition allows with the same `Σ P`.
    pub fn max_admissible_dt(&self) -> f64 {
        self.threshold / (self.s_inv_frob * self.p_sum)
    }
}

pub fn build_report(
    field: &CoefficientField,
    sys: &GalerkinSystem,
    dt: f64,
    p_sum: f64,
) -> StabilityReport {
    let c = data_bound_c(field);
    let s_inv_frob = frobenius(&sys.s_inv);
    let mon = monitor(field, c);
    StabilityReport {
        c,
        s_inv_frob,
        p_sum,
        dt,
        admissibility_lhs: dt * s_inv_frob * p_sum,
        admissibility_threshold: admissibility_threshold(c),
        dt_admissible: dt_admissible(dt, s_inv_frob, p_sum, c),
        max_norm_observed: mon.max_norm_observed,
        bound_2c: mon.bound_2c,
        within_bound: mon.within_bound,
        amplification: amplification(c),
    }
}

//! Explicit Fourier-Klibanov solver for an age-structured tumor-growth
//! model with Gompertz kinetics,
//!
//! ```text
//! ∂_t u + ∂_a u - D(t,a) ∂_xx u + μ(a) u = -ρ u ln(u / e^{𝔎/d}),   x ∈ (-ℓ, ℓ),
//! ```
//!
//! with zero-flux boundaries in `x`, initial data `u_0(a, x)` and newborn
//! data `ū_0(t, x)`.
//!
//! The density is mapped to `v = ln(u e^{-𝔎/d}) / Π(a)`, expanded in the
//! orthonormal basis `Ψ_n = P_n(x) e^x` ([`basis`]), and the resulting coupled
//! coefficient system ([`galerkin`]) is stepped explicitly along the `t = a`
//! characteristic ([`stepper`]). [`stability`] turns the boundedness and
//! perturbation estimates into runtime diagnostics, [`postprocess`] computes
//! observables and writes CSV, and [`oracle`] is an independent reference
//! solver for the untransformed equation.

// `!(x <= limit)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod config;
pub mod error;
pub mod galerkin;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod postprocess;
pub mod stability;
pub mod stepper;
pub mod table;

pub use basis::{build_basis, eval_basis, exp_moment, inner_product, BasisSet};
pub use error::{FkError, Result};
pub use galerkin::{assemble_structure, step_operators, GalerkinSystem, StepOperators};
pub use model::{forward_transform, inverse_transform, preset, survival, GridSpec, ModelConfig};
pub use poly::Polynomial;
pub use stability::StabilityReport;
pub use stepper::{
    reconstruct, solve, CoefficientField, DensityField, QuadratureRule, Solution, SolveOptions,
};

/// Basis, structure matrices and solution for one configuration.
pub fn run_model(
    cfg: &ModelConfig,
    opts: SolveOptions,
) -> Result<(BasisSet, GalerkinSystem, Solution)> {
    let basis = build_basis(cfg.cutoff, cfg.ell)?;
    let sys = assemble_structure(&basis)?;
    let sol = solve(cfg, &basis, &sys, opts)?;
    Ok((basis, sys, sol))
}

//! Physical problem definition: parameters, coefficient functions, the
//! logarithmic transform and the three reference experiments.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::basis::MAX_CUTOFF;
use crate::error::{FkError, Result};
use crate::table::{Table1, Table2};

/// Pure function of two real arguments.
#[derive(Clone)]
pub struct Coef2(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl Coef2 {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn table(t: Table2) -> Self {
        Self::new(move |p, q| t.eval(p, q))
    }

    #[inline]
    pub fn eval(&self, p: f64, q: f64) -> f64 {
        (self.0)(p, q)
    }
}

impl fmt::Debug for Coef2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Coef2(..)")
    }
}

/// Mortality law `μ(a)` with its survival probability `Π(a) = exp(-∫_0^a μ)`.
#[derive(Debug, Clone)]
pub enum Mortality {
    /// `μ(a) = (a† - a)^{-1}`, `Π(a) = (a† - a)/a†`.
    Standard,
    /// `μ ≡ 0`, `Π ≡ 1`.
    Zero,
    Table(Table1),
}

impl Mortality {
    pub fn mu(&self, a: f64, a_max: f64) -> f64 {
        match self {
            Mortality::Standard => 1.0 / (a_max - a),
            Mortality::Zero => 0.0,
            Mortality::Table(t) => t.eval(a),
        }
    }

    pub fn survival(&self, a: f64, a_max: f64) -> f64 {
        match self {
            Mortality::Standard => ((a_max - a) / a_max).max(0.0),
            Mortality::Zero => 1.0,
            Mortality::Table(t) => (-t.integral_to(a)).exp(),
        }
    }
}

/// `Π(a) = (a† - a)/a†` for the standard mortality `μ(a) = (a† - a)^{-1}`.
pub fn survival(a: f64, a_max: f64) -> Result<f64> {
    if !(0.0..=a_max).contains(&a) {
        return Err(FkError::AgeOutOfRange(a, a_max));
    }
    Ok((a_max - a) / a_max)
}

/// Full problem configuration.
///
/// Units: months for `t`, `a`, `a_max`, `t_final`; cm for `x`, `ell`, `dx`;
/// thousands of cells/cm for densities.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    /// Preset id when the config derives from one of the reference experiments.
    pub example: Option<u32>,
    pub rho: f64,
    pub k_gomp: f64,
    pub d_gomp: f64,
    pub ell: f64,
    pub a_max: f64,
    pub t_final: f64,
    /// Number of time steps `M`.
    pub steps: usize,
    /// Cut-off `N`.
    pub cutoff: usize,
    pub dx: f64,
    /// `D(t, a)`.
    pub diffusion: Coef2,
    pub mortality: Mortality,
    /// `u_0(a, x)`.
    pub u0: Coef2,
    /// `ū_0(t, x)`.
    pub u0_bar: Coef2,
}

impl ModelConfig {
    /// `𝔎/d`.
    pub fn kd_ratio(&self) -> f64 {
        self.k_gomp / self.d_gomp
    }

    /// Carrying level `e^{𝔎/d}`.
    pub fn carrying_level(&self) -> f64 {
        self.kd_ratio().exp()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn mu(&self, a: f64) -> f64 {
        self.mortality.mu(a, self.a_max)
    }

    pub fn survival(&self, a: f64) -> f64 {
        self.mortality.survival(a, self.a_max)
    }

    pub fn eval_diffusion(&self, t: f64, a: f64) -> f64 {
        self.diffusion.eval(t, a)
    }

    /// Validates every constraint and returns the lattice. All violations are
    /// collected into a single error.
    pub fn validate(&self) -> Result<GridSpec> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("T", self.t_final),
            ("ell", self.ell),
            ("a_max", self.a_max),
            ("dx", self.dx),
            ("d_gomp", self.d_gomp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.k_gomp.is_finite() {
            problems.push(format!("K_gomp must be finite, got {}", self.k_gomp));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            problems.push(format!("rho must be non-negative, got {}", self.rho));
        }
        if self.steps < 2 {
            problems.push(format!("M must be at least 2, got {}", self.steps));
        }
        if !(1..=MAX_CUTOFF).contains(&self.cutoff) {
            problems.push(format!(
                "N must lie in 1..={MAX_CUTOFF}, got {}",
                self.cutoff
            ));
        }
        if !problems.is_empty() {
            return Err(FkError::InvalidConfig(problems));
        }
        let grid = match GridSpec::new(self) {
            Ok(g) => g,
            Err(FkError::GridMismatch(msg)) => return Err(FkError::InvalidConfig(vec![msg])),
            Err(e) => return Err(e),
        };

        let mut scale: f64 = 0.0;
        let mut compat: f64 = 0.0;
        for &x in &grid.x_nodes {
            let a = self.u0.eval(0.0, x);
            scale = scale.max(a.abs());
            compat = compat.max((a - self.u0_bar.eval(0.0, x)).abs());
        }
        if compat > 1e-9 * scale {
            problems.push(format!(
                "compatibility violated: max |u0(0,x) - u0_bar(0,x)| = {compat:.3e}"
            ));
        }
        if let Some((a, x, v)) = first_non_positive(&grid.a_nodes, &grid.x_nodes, &self.u0) {
            problems.push(format!("u0 not positive at (a={a}, x={x}): {v}"));
        }
        if let Some((t, x, v)) = first_non_positive(&grid.t_nodes, &grid.x_nodes, &self.u0_bar) {
            problems.push(format!("u0_bar not positive at (t={t}, x={x}): {v}"));
        }
        for &t in &grid.t_nodes {
            for &a in &grid.a_nodes {
                let d = self.eval_diffusion(t, a);
                if !(d >= 0.0) {
                    problems.push(format!("D negative at (t={t}, a={a}): {d}"));
                    break;
                }
            }
            if problems.len() > 16 {
                break;
            }
        }
        if problems.is_empty() {
            Ok(grid)
        } else {
            Err(FkError::InvalidConfig(problems))
        }
    }
}

fn first_non_positive(outer: &[f64], xs: &[f64], f: &Coef2) -> Option<(f64, f64, f64)> {
    outer.iter().find_map(|&p| {
        xs.iter().find_map(|&x| {
            let v = f.eval(p, x);
            (!(v > 0.0 && v.is_finite())).then_some((p, x, v))
        })
    })
}

/// `v = ln(u e^{-𝔎/d}) / Π(a)`.
pub fn forward_transform(u: f64, a: f64, cfg: &ModelConfig) -> Result<f64> {
    if !(u > 0.0) {
        return Err(FkError::NonPositiveDensity(u));
    }
    let pi = cfg.survival(a);
    if !(pi > 1e-12) {
        return Err(FkError::SingularAge(a));
    }
    Ok((u.ln() - cfg.kd_ratio()) / pi)
}

/// `u = e^{𝔎/d} e^{Π(a) v}`.
pub fn inverse_transform(v: f64, a: f64, cfg: &ModelConfig) -> Result<f64> {
    if !(0.0..=cfg.a_max).contains(&a) {
        return Err(FkError::AgeOutOfRange(a, cfg.a_max));
    }
    let pi = cfg.survival(a);
    if pi == 0.0 {
        return Ok(cfg.carrying_level());
    }
    let exponent = pi * v;
    if !(exponent <= 700.0) {
        return Err(FkError::Overflow { exponent });
    }
    Ok((cfg.kd_ratio() + exponent).exp())
}

/// The `(t, a, x)` lattice.
///
/// Age nodes advance with the time step and stop strictly below `a_max`,
/// where the mortality and the transform are singular.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dt: f64,
    pub dx: f64,
    pub t_nodes: Vec<f64>,
    pub a_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
}

impl GridSpec {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let dt = cfg.dt();
        let t_nodes = (0..=cfg.steps).map(|i| i as f64 * dt).collect();
        let a_count = (cfg.a_max / dt - 1e-9).ceil().max(1.0) as usize;
        let a_nodes = (0..a_count).map(|j| j as f64 * dt).collect();
        let x_nodes = x_grid(cfg.ell, cfg.dx)?;
        let dx = 2.0 * cfg.ell / (x_nodes.len() - 1) as f64;
        Ok(Self {
            dt,
            dx,
            t_nodes,
            a_nodes,
            x_nodes,
        })
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn n_a(&self) -> usize {
        self.a_nodes.len()
    }

    pub fn n_x(&self) -> usize {
        self.x_nodes.len()
    }
}

/// Uniform symmetric grid `-ℓ, -ℓ + Δx, …, ℓ`; `Δx` must divide `2ℓ`.
pub fn x_grid(ell: f64, dx: f64) -> Result<Vec<f64>> {
    let ratio = 2.0 * ell / dx;
    let intervals = ratio.round();
    if !(intervals >= 1.0) || (ratio - intervals).abs() > 1e-9 * ratio.max(1.0) {
        return Err(FkError::GridMismatch(format!(
            "dx = {dx} does not divide 2*ell = {}",
            2.0 * ell
        )));
    }
    let n = intervals as usize;
    let h = 2.0 * ell / n as f64;
    Ok((0..=n)
        .map(|l| match l {
            0 => -ell,
            l if l == n => ell,
            l => -ell + l as f64 * h,
        })
        .collect())
}

pub const PRESET_T: f64 = 10.0;
pub const PRESET_A_MAX: f64 = 12.0;

/// One of the three reference experiments, with `N = 6` and `M = 200`.
///
/// The coefficient functions capture `T = 10` and `a† = 12`; overriding
/// `t_final` afterwards shortens the horizon without changing the physics.
pub fn preset(example_id: u32) -> Result<ModelConfig> {
    let t_cap = PRESET_T;
    let a_max = PRESET_A_MAX;
    let gauss_norm = |eps: f64| 1.0 / ((2.0 * PI).sqrt() * eps);
    let (rho, diffusion, u0, u0_bar) = match example_id {
        1 => {
            let eps = 0.75;
            let c = gauss_norm(eps);
            let prof =
                move |s: f64, x: f64| c * (-(x * x + (s - 0.15).powi(2)) / (2.0 * eps * eps)).exp();
            let diffusion = move |_t: f64, a: f64| {
                if a <= 0.0 {
                    0.03
                } else {
                    0.03 - 0.03 * (-(a_max / 8.0 - a).powi(2) / a).exp()
                }
            };
            (
                0.5,
                Coef2::new(diffusion),
                Coef2::new(prof),
                Coef2::new(prof),
            )
        }
        2 => {
            let eps = 0.075;
            let u0 = move |a: f64, x: f64| (-6.0 * x * x).exp() / (eps + (a - 7.0).cosh());
            let ub = move |t: f64, x: f64| (-6.0 * x * x).exp() / (eps + (3.0 * t - 7.0).cosh());
            let diffusion =
                move |t: f64, a: f64| (-(t - 8.0 * t_cap).powi(2) / t_cap).exp() * (a_max - a);
            (7.0, Coef2::new(diffusion), Coef2::new(u0), Coef2::new(ub))
        }
        3 => {
            let c = gauss_norm(0.5);
            let prof = move |s: f64, x: f64| {
                c * (2.0 - (PI / 4.0 * (s - 3.0)).sin()) * (-(x - 0.25).powi(2)).exp()
            };
            let diffusion = move |t: f64, a: f64| {
                (-(t - 2.0 * t_cap).powi(2) - (a - 2.0 * a_max).powi(2)).exp()
            };
            (
                0.36,
                Coef2::new(diffusion),
                Coef2::new(prof),
                Coef2::new(prof),
            )
        }
        other => return Err(FkError::UnknownPreset(other)),
    };
    Ok(ModelConfig {
        example: Some(example_id),
        rho,
        k_gomp: 1.0,
        d_gomp: 1.0,
        ell: 1.0,
        a_max,
        t_final: t_cap,
        steps: 200,
        cutoff: 6,
        dx: 0.05,
        diffusion,
        mortality: Mortality::Standard,
        u0,
        u0_bar,
    })
}

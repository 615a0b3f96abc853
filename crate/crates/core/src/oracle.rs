//! Brute-force reference solver for the density equation itself.
//!
//! Works on `u` directly: upwind differencing along the `t = a`
//! characteristic, a centred second difference in `x` with ghost-point
//! zero-flux boundaries, an explicit Gompertz source, and mortality applied
//! through the exact survival ratio between consecutive ages. It shares no
//! code path with the spectral solver and exists to cross-check it.

use crate::error::{FkError, Result};
use crate::model::{GridSpec, ModelConfig};
use crate::stepper::DensityField;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub model: ModelConfig,
    /// Sub-steps per coarse time step.
    pub dt_refine: usize,
    /// Sub-intervals per coarse `Δx`.
    pub dx_refine: usize,
}

impl OracleConfig {
    pub fn new(model: ModelConfig, dt_refine: usize, dx_refine: usize) -> Self {
        Self {
            model,
            dt_refine,
            dx_refine,
        }
    }
}

/// Density on the coarse output lattice of `cfg.model`, every time level.
pub fn solve_reference(cfg: &OracleConfig) -> Result<DensityField> {
    if cfg.dt_refine == 0 || cfg.dx_refine == 0 {
        return Err(FkError::InvalidConfig(vec![
            "refinement factors must be at least 1".into(),
        ]));
    }
    let model = &cfg.model;
    let coarse: GridSpec = model.validate()?;
    let rt = cfg.dt_refine;
    let rx = cfg.dx_refine;
    let dt = coarse.dt / rt as f64;
    let dx = coarse.dx / rx as f64;
    let n_x = (coarse.n_x() - 1) * rx + 1;
    let n_a = (model.a_max / dt - 1e-9).ceil() as usize;
    let xs: Vec<f64> = (0..n_x).map(|l| -model.ell + l as f64 * dx).collect();
    let ages: Vec<f64> = (0..n_a).map(|j| j as f64 * dt).collect();
    let n_steps = model.steps * rt;

    let mut d_max: f64 = 0.0;
    for s in 0..n_steps {
        let t = s as f64 * dt;
        for &a in &ages {
            d_max = d_max.max(model.eval_diffusion(t, a));
        }
    }
    let ratio = d_max * dt / (dx * dx);
    if ratio > 0.5 {
        return Err(FkError::Cfl {
            ratio,
            required: (rt as f64 * ratio / 0.5).ceil() as usize,
        });
    }

    let kd = model.kd_ratio();
    let survival_ratio: Vec<f64> = (1..n_a)
        .map(|j| model.survival(ages[j]) / model.survival(ages[j - 1]))
        .collect();

    let mut u: Vec<f64> = ages
        .iter()
        .flat_map(|&a| xs.iter().map(move |&x| (a, x)))
        .map(|(a, x)| model.u0.eval(a, x))
        .collect();
    let mut next = vec![0.0; u.len()];

    let mut out = DensityField {
        t_indices: Vec::with_capacity(coarse.n_t()),
        t_values: Vec::with_capacity(coarse.n_t()),
        a_nodes: coarse.a_nodes.clone(),
        x_nodes: coarse.x_nodes.clone(),
        slices: Vec::with_capacity(coarse.n_t()),
    };
    let mut record = |i: usize, u: &[f64]| {
        let mut slice = Vec::with_capacity(coarse.n_a() * coarse.n_x());
        for j in 0..coarse.n_a() {
            for l in 0..coarse.n_x() {
                slice.push(u[j * rt * n_x + l * rx]);
            }
        }
        out.t_indices.push(i);
        out.t_values.push(coarse.t_nodes[i]);
        out.slices.push(slice);
    };
    record(0, &u);

    for s in 1..=n_steps {
        let t_prev = (s - 1) as f64 * dt;
        let t = s as f64 * dt;
        for (l, &x) in xs.iter().enumerate() {
            next[l] = model.u0_bar.eval(t, x);
        }
        for j in 1..n_a {
            let a_prev = ages[j - 1];
            let diff = model.eval_diffusion(t_prev, a_prev);
            let src = &u[(j - 1) * n_x..j * n_x];
            let dst = &mut next[j * n_x..(j + 1) * n_x];
            for l in 0..n_x {
                let left = if l == 0 { src[1] } else { src[l - 1] };
                let right = if l + 1 == n_x {
                    src[n_x - 2]
                } else {
                    src[l + 1]
                };
                let lap = (left - 2.0 * src[l] + right) / (dx * dx);
                let growth = -model.rho * src[l] * (src[l].ln() - kd);
                let value = (src[l] + dt * (diff * lap + growth)) * survival_ratio[j - 1];
                if !(value > 0.0 && value.is_finite()) {
                    return Err(FkError::BlowUp {
                        i: s,
                        j,
                        detail: format!("reference density {value} at x = {}", xs[l]),
                    });
                }
                dst[l] = value;
            }
        }
        std::mem::swap(&mut u, &mut next);
        if s % rt == 0 {
            record(s / rt, &u);
        }
    }
    Ok(out)
}

//! Structure matrices of the coupled coefficient system and the per-node
//! step operators.

use nalgebra::{DMatrix, DVector};

use crate::basis::{inner_product, BasisSet};
use crate::error::{FkError, Result};

/// Limit on `|s_mn|` below the diagonal and on `|s_mm - 1|`.
pub const TRIANGULARITY_LIMIT: f64 = 1e-9;

/// `S_N`, its inverse, `κ` and the rank-3 tensor `ς` for one basis.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    /// `s_mn = ⟨Ψ_n', Ψ_m⟩`, unit upper triangular.
    pub s: DMatrix<f64>,
    pub s_inv: DMatrix<f64>,
    /// `κ_mn = ⟨Ψ_n''', Ψ_m⟩`.
    pub kappa: DMatrix<f64>,
    /// `sigma[m][(n, k)] = ⟨Ψ_n' Ψ_k'', Ψ_m⟩`.
    pub sigma: Vec<DMatrix<f64>>,
}

impl GalerkinSystem {
    pub fn cutoff(&self) -> usize {
        self.s.nrows()
    }

    /// `max(max_{n<m} |s_mn|, max_m |s_mm - 1|)`.
    pub fn triangularity_defect(&self) -> f64 {
        let n = self.cutoff();
        let mut defect: f64 = 0.0;
        for m in 0..n {
            defect = defect.max((self.s[(m, m)] - 1.0).abs());
            for k in 0..m {
                defect = defect.max(self.s[(m, k)].abs());
            }
        }
        defect
    }

    /// Product of the diagonal of `S_N`.
    pub fn det_s(&self) -> f64 {
        self.s.diagonal().iter().product()
    }

    pub fn s_inv_frobenius(&self) -> f64 {
        self.s_inv.norm()
    }

    /// Solves `S x = rhs` by back substitution; entries below the diagonal
    /// (rounding residue only) are ignored.
    pub fn solve_s(&self, rhs: &DVector<f64>) -> DVector<f64> {
        back_substitute(&self.s, rhs)
    }
}

pub(crate) fn back_substitute(upper: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = rhs.len();
    let mut x = rhs.clone();
    for m in (0..n).rev() {
        let mut acc = x[m];
        for k in m + 1..n {
            acc -= upper[(m, k)] * x[k];
        }
        x[m] = acc / upper[(m, m)];
    }
    x
}

/// Assembles `S_N`, `S_N^{-1}`, `κ` and `ς` by exact polynomial algebra.
pub fn assemble_structure(basis: &BasisSet) -> Result<GalerkinSystem> {
    let n = basis.cutoff();
    let ell = basis.ell();
    let p0 = basis.polys();
    let p1: Vec<_> = (0..n).map(|i| basis.derivative_poly(i, 1)).collect();
    let p2: Vec<_> = (0..n).map(|i| basis.derivative_poly(i, 2)).collect();
    let p3: Vec<_> = (0..n).map(|i| basis.derivative_poly(i, 3)).collect();

    let s = DMatrix::from_fn(n, n, |m, k| inner_product(&p1[k], &p0[m], 2, ell));
    let kappa = DMatrix::from_fn(n, n, |m, k| inner_product(&p3[k], &p0[m], 2, ell));
    let sigma = (0..n)
        .map(|m| {
            DMatrix::from_fn(n, n, |a, b| {
                inner_product(&(&p1[a] * &p2[b]), &p0[m], 3, ell)
            })
        })
        .collect();

    let mut sys = GalerkinSystem {
        s,
        s_inv: DMatrix::zeros(n, n),
        kappa,
        sigma,
    };
    let defect = sys.triangularity_defect();
    if !(defect <= TRIANGULARITY_LIMIT) {
        return Err(FkError::TriangularityDefect(defect));
    }
    let mut s_inv = DMatrix::zeros(n, n);
    for col in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == col { 1.0 } else { 0.0 });
        s_inv.set_column(col, &back_substitute(&sys.s, &e));
    }
    sys.s_inv = s_inv;
    Ok(sys)
}

/// Linear and quadratic operators of one explicit step, evaluated at a
/// single lattice node.
#[derive(Debug, Clone)]
pub struct StepOperators {
    /// `(μ - ρ e^{-𝔎/d}) S + D κ`.
    pub k_mat: DMatrix<f64>,
    /// `2 D Π ς_m` for each output row `m`.
    pub g_tensors: Vec<DMatrix<f64>>,
}

impl StepOperators {
    /// `K V + (Vᵀ G_m V)_m`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.k_mat * v;
        for (m, g) in self.g_tensors.iter().enumerate() {
            out[m] += v.dot(&(g * v));
        }
        out
    }
}

/// Builds `𝕂` and `𝔾_m` at a node with diffusion `d_val`, mortality `mu_val`
/// and survival `pi_val`. `kd_ratio` is `𝔎/d`.
pub fn step_operators(
    sys: &GalerkinSystem,
    d_val: f64,
    mu_val: f64,
    pi_val: f64,
    rho: f64,
    kd_ratio: f64,
) -> Result<StepOperators> {
    if d_val < 0.0 {
        return Err(FkError::NegativeDiffusion(d_val));
    }
    let growth = mu_val - rho * (-kd_ratio).exp();
    let k_mat = &sys.s * growth + &sys.kappa * d_val;
    let g_scale = 2.0 * d_val * pi_val;
    let g_tensors = sys.sigma.iter().map(|sig| sig * g_scale).collect();
    Ok(StepOperators { k_mat, g_tensors })
}

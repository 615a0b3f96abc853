//! The orthonormal exponential-polynomial basis `Ψ_n(x) = P_n(x) e^x` on
//! `[-ℓ, ℓ]`, built by Gram-Schmidt from `x^{n-1} e^x`.
//!
//! Every inner product is evaluated in closed form through exponential
//! moments, so the basis and all downstream structure matrices carry no
//! quadrature error.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{FkError, Result};
use crate::poly::Polynomial;

/// Largest supported cut-off in double precision.
pub const MAX_CUTOFF: usize = 12;

/// Gram defect above which construction is rejected.
pub const GRAM_DEFECT_LIMIT: f64 = 1e-8;

/// `∫_{-ℓ}^{ℓ} x^k e^{cx} dx`.
///
/// Uses the integration-by-parts recurrence while it is forward stable
/// (`k ≤ |c|ℓ`) and the Taylor series of `e^{cx}` otherwise. All series terms
/// share one sign, so the series has no cancellation.
pub fn exp_moment(k: usize, c: f64, ell: f64) -> f64 {
    if c == 0.0 {
        return odd_power_span(k + 1, ell) / (k + 1) as f64;
    }
    if k as f64 <= c.abs() * ell {
        exp_moment_recurrence(k, c, ell)
    } else {
        exp_moment_series(k, c, ell)
    }
}

/// `ℓ^n - (-ℓ)^n`.
fn odd_power_span(n: usize, ell: f64) -> f64 {
    if n % 2 == 1 {
        2.0 * ell.powi(n as i32)
    } else {
        0.0
    }
}

fn exp_moment_recurrence(k: usize, c: f64, ell: f64) -> f64 {
    let (ep, em) = ((c * ell).exp(), (-c * ell).exp());
    let mut acc = (ep - em) / c;
    for j in 1..=k {
        let boundary = ell.powi(j as i32) * ep - (-ell).powi(j as i32) * em;
        acc = boundary / c - (j as f64 / c) * acc;
    }
    acc
}

fn exp_moment_series(k: usize, c: f64, ell: f64) -> f64 {
    // Σ_m c^m/m! ∫ x^{k+m} dx, only terms with k+m even survive.
    let mut sum = 0.0;
    let mut term = 1.0; // c^m / m!
    let mut m = 0usize;
    loop {
        let n = k + m + 1;
        if n % 2 == 1 {
            let contrib = term * 2.0 * ell.powi(n as i32) / n as f64;
            sum += contrib;
            if m > 2 && contrib.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        m += 1;
        term *= c / m as f64;
        if m > 400 || term == 0.0 {
            break;
        }
    }
    sum
}

/// `∫_{-ℓ}^{ℓ} p(x) q(x) e^{w x} dx` for polynomials `p`, `q`.
///
/// With `w = 2` this is `⟨p e^x, q e^x⟩`; triple products of basis
/// functions use `w = 3`.
pub fn inner_product(p: &Polynomial, q: &Polynomial, exp_weight: i32, ell: f64) -> f64 {
    poly_exp_integral(&(p * q), exp_weight, ell)
}

/// `∫_{-ℓ}^{ℓ} r(x) e^{w x} dx`.
pub fn poly_exp_integral(r: &Polynomial, exp_weight: i32, ell: f64) -> f64 {
    r.coeffs()
        .iter()
        .enumerate()
        .map(|(k, &a)| a * exp_moment(k, exp_weight as f64, ell))
        .sum()
}

/// The first `N` orthonormal basis functions on `[-ℓ, ℓ]`.
///
/// Functions are indexed from 0 in the API; file formats and reports use
/// the 1-based index `n = index + 1`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    ell: f64,
    polys: Vec<Polynomial>,
}

impl BasisSet {
    pub fn cutoff(&self) -> usize {
        self.polys.len()
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    /// Polynomial part of `d^order Ψ_n / dx^order`.
    pub fn derivative_poly(&self, index: usize, order: usize) -> Polynomial {
        self.polys[index].exp_derivative_n(order)
    }

    /// `d^order Ψ_n(x)/dx^order` without range checks.
    pub fn value(&self, index: usize, order: usize, x: f64) -> f64 {
        self.derivative_poly(index, order).eval(x) * x.exp()
    }

    /// Exact Gram matrix `⟨Ψ_m, Ψ_n⟩`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.cutoff();
        DMatrix::from_fn(n, n, |m, k| {
            inner_product(&self.polys[m], &self.polys[k], 2, self.ell)
        })
    }

    /// `max |⟨Ψ_m, Ψ_n⟩ - δ_mn|`.
    pub fn gram_defect(&self) -> f64 {
        let g = self.gram_matrix();
        let n = self.cutoff();
        (g - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Writes the coefficient table as CSV with header `n,k,coeff`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| FkError::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(out, "n,k,coeff")?;
            for (idx, p) in self.polys.iter().enumerate() {
                for (k, c) in p.coeffs().iter().enumerate() {
                    writeln!(out, "{},{},{:.16e}", idx + 1, k, c)?;
                }
            }
            out.flush()
        };
        emit().map_err(|e| FkError::io(path, e))
    }
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass over
/// `{x^{n-1} e^x}`, each `P_n` normalised to a positive leading coefficient.
pub fn build_basis(cutoff: usize, ell: f64) -> Result<BasisSet> {
    if !(1..=MAX_CUTOFF).contains(&cutoff) {
        return Err(FkError::UnsupportedCutoff(cutoff));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(FkError::InvalidHalfWidth(ell));
    }
    let mut polys: Vec<Polynomial> = Vec::with_capacity(cutoff);
    for deg in 0..cutoff {
        let mut v = Polynomial::monomial(deg);
        for _pass in 0..2 {
            for q in &polys {
                let c = inner_product(&v, q, 2, ell);
                v = (&v - &q.scale(c)).truncate(deg + 1);
            }
        }
        let norm = inner_product(&v, &v, 2, ell).sqrt();
        let mut p = v.scale(1.0 / norm);
        if p.leading_coeff() < 0.0 {
            p = p.scale(-1.0);
        }
        polys.push(p);
    }
    let basis = BasisSet { ell, polys };
    let defect = basis.gram_defect();
    if !(defect <= GRAM_DEFECT_LIMIT) {
        return Err(FkError::GramDefect {
            defect,
            limit: GRAM_DEFECT_LIMIT,
        });
    }
    Ok(basis)
}

/// Row `n` holds `d^order Ψ_n/dx^order` at each point of `xs`.
pub fn eval_basis(basis: &BasisSet, order: usize, xs: &[f64]) -> Result<DMatrix<f64>> {
    if order > 3 {
        return Err(FkError::DerivativeOrder(order));
    }
    let ell = basis.ell;
    let slack = 1e-12 * ell;
    if let Some(&x) = xs.iter().find(|x| !(x.abs() <= ell + slack)) {
        return Err(FkError::OutOfInterval { x, ell });
    }
    let polys: Vec<Polynomial> = (0..basis.cutoff())
        .map(|i| basis.derivative_poly(i, order))
        .collect();
    Ok(DMatrix::from_fn(basis.cutoff(), xs.len(), |n, l| {
        polys[n].eval(xs[l]) * xs[l].exp()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_odd_symmetric_vanishes() {
        assert_eq!(exp_moment(1, 0.0, 1.0), 0.0);
        assert_eq!(exp_moment(0, 0.0, 1.0), 2.0);
    }

    #[test]
    fn moment_zeroth_is_sinh() {
        let v = exp_moment(0, 2.0, 1.0);
        assert!((v - 2.0f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn both_moment_routes_agree_where_recurrence_is_stable() {
        for k in 0..=3 {
            let r = exp_moment_recurrence(k, 4.0, 1.0);
            let s = exp_moment_series(k, 4.0, 1.0);
            assert!((r - s).abs() <= 1e-13 * s.abs(), "k={k}: {r} vs {s}");
        }
    }

    #[test]
    fn single_function_basis_closed_form() {
        let b = build_basis(1, 1.0).unwrap();
        let c = b.polys()[0].coeffs()[0];
        assert!((c - 1.0 / 2.0f64.sinh().sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            build_basis(0, 1.0),
            Err(FkError::UnsupportedCutoff(0))
        ));
        assert!(matches!(
            build_basis(13, 1.0),
            Err(FkError::UnsupportedCutoff(13))
        ));
        assert!(matches!(
            build_basis(3, -1.0),
            Err(FkError::InvalidHalfWidth(_))
        ));
        let b = build_basis(2, 1.0).unwrap();
        assert!(matches!(
            eval_basis(&b, 4, &[0.0]),
            Err(FkError::DerivativeOrder(4))
        ));
        assert!(matches!(
            eval_basis(&b, 0, &[1.5]),
            Err(FkError::OutOfInterval { .. })
        ));
    }

    #[test]
    fn leading_coefficients_positive() {
        let b = build_basis(MAX_CUTOFF, 1.0).unwrap();
        assert!(b.polys().iter().all(|p| p.leading_coeff() > 0.0));
        for (i, p) in b.polys().iter().enumerate() {
            assert_eq!(p.degree(), Some(i));
        }
    }

    #[test]
    fn first_derivative_equals_function_for_n1() {
        let b = build_basis(1, 1.0).unwrap();
        let xs = [-1.0, -0.3, 0.0, 0.8, 1.0];
        let f = eval_basis(&b, 0, &xs).unwrap();
        let df = eval_basis(&b, 1, &xs).unwrap();
        assert_eq!(f, df);
        assert!((f[(0, 2)] - 0.525_091_0).abs() < 1e-6);
    }
}

mod common;

use fkgompertz::galerkin::{GalerkinSystem, StepOperators};
use fkgompertz::model::{Coef2, Mortality};
use fkgompertz::stability::amplification;
use fkgompertz::stepper::{
    node_operators, project_function, step, LineProjector, QuadratureRule, SolveOptions,
};
use fkgompertz::{
    assemble_structure, build_basis, forward_transform, preset, reconstruct, run_model, solve,
    CoefficientField, ModelConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn short(id: u32, steps: usize, t_final: f64) -> ModelConfig {
    let mut cfg = preset(id).unwrap();
    cfg.t_final = t_final;
    cfg.steps = steps;
    cfg
}

fn scalar_system() -> GalerkinSystem {
    let one = DMatrix::from_element(1, 1, 1.0);
    GalerkinSystem {
        s: one.clone(),
        s_inv: one.clone(),
        kappa: one.clone(),
        sigma: vec![one],
    }
}

#[test]
fn scalar_step_hand_value() {
    let sys = scalar_system();
    let ops = StepOperators {
        k_mat: DMatrix::from_element(1, 1, 1.1),
        g_tensors: vec![DMatrix::from_element(1, 1, 1.9338)],
    };
    let v = step(&DVector::from_element(1, 1.0), &ops, &sys, 0.1);
    assert!((v[0] - 1.30338).abs() < 1e-14);
    let same = step(&DVector::from_element(1, 0.7), &ops, &sys, 0.0);
    assert_eq!(same[0], 0.7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_operators_keep_state(v in prop::collection::vec(-5.0f64..5.0, 6), dt in 0.0f64..2.0) {
        let sys = assemble_structure(&build_basis(6, 1.0).unwrap()).unwrap();
        let ops = StepOperators {
            k_mat: DMatrix::zeros(6, 6),
            g_tensors: vec![DMatrix::zeros(6, 6); 6],
        };
        let prev = DVector::from_vec(v);
        let next = step(&prev, &ops, &sys, dt);
        let err = (next - prev).amax();
        prop_assert!(err < 1e-8, "{}", err);
    }
}

#[test]
fn projection_is_linear_and_matches_fine_quadrature() {
    let basis = build_basis(6, 1.0).unwrap();
    let proj = LineProjector::new(&basis, 0.05, QuadratureRule::Simpson).unwrap();
    let f = |x: f64| 2.0 * basis.value(1, 0, x) + 3.0 * basis.value(4, 0, x);
    let samples: Vec<f64> = proj.x_nodes().iter().map(|&x| f(x)).collect();
    let coarse = proj.project(&samples).unwrap();
    let fine = project_function(f, &basis, 2000);
    let expected = [0.0, 2.0, 0.0, 0.0, 3.0, 0.0];
    for n in 0..6 {
        assert!(
            (fine[n] - expected[n]).abs() < 1e-9,
            "fine n={n}: {}",
            fine[n]
        );
        assert!(
            (coarse[n] - expected[n]).abs() < 2e-2,
            "n={n}: {}",
            coarse[n]
        );
    }
    assert!(proj.project(&vec![0.0; 41]).unwrap().amax() == 0.0);
}

#[test]
fn trace_back_matches_stepped_values() {
    let cfg = short(3, 20, 2.0);
    let (basis, sys, sol) = run_model(&cfg, SolveOptions::default()).unwrap();
    assert!(sol.blowup.is_none());
    let _ = basis;
    let field = &sol.field;
    for &(i, j) in &[(20usize, 5usize), (7, 19), (20, 20), (12, 30), (3, 3)] {
        let (i0, j0) = (i - i.min(j), j - i.min(j));
        let mut total = field.vector(i0, j0);
        for s in 1..=i.min(j) {
            let (ip, jp) = (i0 + s - 1, j0 + s - 1);
            let ops = node_operators(&cfg, &sys, &sol.grid, ip, jp).unwrap();
            total += sys.solve_s(&(ops.apply(&field.vector(ip, jp)) * sol.grid.dt));
        }
        let scale = field.vector(i, j).amax().max(1.0);
        let diff = (total - field.vector(i, j)).amax() / scale;
        assert!(diff < 1e-10, "({i},{j}): {diff}");
    }
}

#[test]
fn perturbation_stays_on_its_diagonal() {
    let cfg = short(2, 12, 1.2);
    let basis = build_basis(cfg.cutoff, cfg.ell).unwrap();
    let sys = assemble_structure(&basis).unwrap();
    let base = solve(&cfg, &basis, &sys, SolveOptions::default()).unwrap();
    let grid = &base.grid;
    let target = 4;
    let a_t = grid.a_nodes[target];
    let half = 0.25 * grid.dt;
    let orig = cfg.u0.clone();
    let mut bumped = cfg.clone();
    bumped.u0 = Coef2::new(move |a, x| {
        let u = orig.eval(a, x);
        if (a - a_t).abs() < half {
            1.3 * u
        } else {
            u
        }
    });
    let pert = solve(&bumped, &basis, &sys, SolveOptions::default()).unwrap();
    let mut touched = 0;
    for i in 0..grid.n_t() {
        for j in 0..grid.n_a() {
            let same = base.field.get(i, j) == pert.field.get(i, j);
            if j >= i && j - i == target {
                assert!(!same, "({i},{j}) unchanged");
                touched += 1;
            } else {
                assert!(same, "({i},{j}) changed");
            }
        }
    }
    assert_eq!(touched, grid.n_t());
}

#[test]
fn corner_is_compatible() {
    for id in 1..=3 {
        let cfg = preset(id).unwrap();
        let basis = build_basis(6, 1.0).unwrap();
        let proj = LineProjector::new(&basis, cfg.dx, QuadratureRule::Simpson).unwrap();
        let from = |c: &Coef2| {
            let s: Vec<f64> = proj
                .x_nodes()
                .iter()
                .map(|&x| forward_transform(c.eval(0.0, x), 0.0, &cfg).unwrap())
                .collect();
            proj.project(&s).unwrap()
        };
        let diff = (from(&cfg.u0) - from(&cfg.u0_bar)).amax();
        assert!(diff <= 1e-9, "preset {id}: {diff}");
    }
}

#[test]
fn example_one_default_run_completes() {
    let cfg = preset(1).unwrap();
    let (_, _, sol) = run_model(&cfg, SolveOptions::default()).unwrap();
    assert!(sol.blowup.is_none());
    assert!(sol.report.max_norm_observed.is_finite());
    assert!(sol.report.c > 0.0);
    assert_eq!(sol.grid.n_t(), 201);
    assert_eq!(sol.grid.n_a(), 240);
}

#[test]
fn zero_field_reconstructs_carrying_level() {
    let cfg = short(1, 4, 0.4);
    let grid = cfg.validate().unwrap();
    let basis = build_basis(6, 1.0).unwrap();
    let field = CoefficientField::zeros(grid.n_t(), grid.n_a(), 6);
    let dens = reconstruct(&field, &basis, &cfg, &grid, &[0, 4]).unwrap();
    for s in &dens.slices {
        assert!(s.iter().all(|&u| (u - cfg.carrying_level()).abs() < 1e-15));
    }
}

#[test]
fn initial_slice_reproduces_initial_data() {
    let cfg = preset(1).unwrap();
    let (basis, _, sol) = run_model(&cfg, SolveOptions::default()).unwrap();
    let dens = reconstruct(&sol.field, &basis, &cfg, &sol.grid, &[0]).unwrap();
    let mut err: f64 = 0.0;
    let mut top: f64 = 0.0;
    for (j, &a) in dens.a_nodes.iter().enumerate() {
        for (l, &x) in dens.x_nodes.iter().enumerate() {
            let u = cfg.u0.eval(a, x);
            err = err.max((dens.at(0, j, l) - u).abs());
            top = top.max(u);
        }
    }
    // Truncation plus grid-projection error, in percent.
    assert!(100.0 * err / top < 0.2, "{}", 100.0 * err / top);
}

#[test]
fn top_age_within_coefficient_bound() {
    let cfg = preset(3).unwrap();
    let (basis, _, sol) = run_model(&cfg, SolveOptions::default()).unwrap();
    let grid = &sol.grid;
    let j = grid.n_a() - 1;
    let a = grid.a_nodes[j];
    let sup: Vec<f64> = (0..6)
        .map(|n| {
            grid.x_nodes
                .iter()
                .map(|&x| basis.value(n, 0, x).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let times: Vec<usize> = (0..grid.n_t()).step_by(20).collect();
    let dens = reconstruct(&sol.field, &basis, &cfg, grid, &times).unwrap();
    for (s, &i) in times.iter().enumerate() {
        let v_sup: f64 = sol
            .field
            .get(i, j)
            .iter()
            .zip(&sup)
            .map(|(v, m)| v.abs() * m)
            .sum();
        let bound = (cfg.survival(a) * v_sup).exp();
        for l in 0..grid.n_x() {
            let ratio = dens.at(s, j, l) / cfg.carrying_level();
            assert!(ratio <= bound * (1.0 + 1e-12) && ratio >= (1.0 - 1e-12) / bound);
        }
    }
}

#[test]
fn single_mode_perturbation_within_amplification() {
    let mut cfg = short(3, 10, 1.0);
    cfg.cutoff = 1;
    cfg.a_max = 3.0;
    cfg.mortality = Mortality::Zero;
    let basis = build_basis(1, 1.0).unwrap();
    let sys = assemble_structure(&basis).unwrap();
    let base = solve(&cfg, &basis, &sys, SolveOptions::default()).unwrap();
    let mut other = cfg.clone();
    let (u0, ub) = (cfg.u0.clone(), cfg.u0_bar.clone());
    other.u0 = Coef2::new(move |a, x| u0.eval(a, x) * (1.0 + 0.02 * (a * 3.0).sin()));
    other.u0_bar = Coef2::new(move |t, x| ub.eval(t, x) * (1.0 + 0.02 * (t * 3.0).sin()));
    let pert = solve(&other, &basis, &sys, SolveOptions::default()).unwrap();
    let diff = |i: usize, j: usize| (base.field.vector(i, j) - pert.field.vector(i, j)).norm();
    let boundary: f64 = base
        .field
        .boundary_nodes()
        .map(|(i, j)| diff(i, j))
        .fold(0.0, f64::max);
    let mut interior: f64 = 0.0;
    for i in 0..base.grid.n_t() {
        for j in 0..base.grid.n_a() {
            interior = interior.max(diff(i, j));
        }
    }
    let c = base.report.c.max(pert.report.c);
    assert!(boundary > 0.0);
    assert!(
        interior <= amplification(c) * boundary,
        "{interior} vs {}",
        amplification(c) * boundary
    );
}

//! Python bindings for the `fkgompertz` solver.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use solver::postprocess::{self, EmaxGrid, SummaryRow};
use solver::stepper::{self, QuadratureRule, SolveOptions};
use solver::{config, stability, FkError, ModelConfig};

fn to_py(e: FkError) -> PyErr {
    match e {
        FkError::BlowUp { .. } | FkError::Overflow { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rule(name: &str) -> PyResult<QuadratureRule> {
    match name {
        "simpson" => Ok(QuadratureRule::Simpson),
        "trapezoid" => Ok(QuadratureRule::Trapezoid),
        other => Err(PyValueError::new_err(format!(
            "unknown quadrature {other:?}"
        ))),
    }
}

/// Model configuration: a preset or a TOML file, plus scalar overrides.
#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    cfg: ModelConfig,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn preset(example: u32) -> PyResult<Self> {
        Ok(Self {
            cfg: solver::preset(example).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            cfg: config::load_config(&path).map_err(to_py)?,
        })
    }

    /// Overrides a scalar, e.g. `model.set("M", 400)`.
    fn set(&mut self, key: &str, value: f64) -> PyResult<()> {
        config::apply_override(&mut self.cfg, &format!("{key}={value}")).map_err(to_py)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.cfg.steps
    }

    #[setter]
    fn set_steps(&mut self, m: usize) {
        self.cfg.steps = m;
    }

    #[getter]
    fn cutoff(&self) -> usize {
        self.cfg.cutoff
    }

    #[setter]
    fn set_cutoff(&mut self, n: usize) {
        self.cfg.cutoff = n;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.cfg.dt()
    }

    /// Grid sizes and checks; raises on an invalid configuration.
    fn validate(&self) -> PyResult<(usize, usize, usize)> {
        let g = self.cfg.validate().map_err(to_py)?;
        Ok((g.n_t(), g.n_a(), g.n_x()))
    }

    #[pyo3(signature = (quadrature = None))]
    fn solve(&self, quadrature: Option<&str>) -> PyResult<PyRun> {
        let opts = SolveOptions {
            rule: rule(quadrature.unwrap_or("simpson"))?,
        };
        let (basis, _, sol) = solver::run_model(&self.cfg, opts).map_err(to_py)?;
        Ok(PyRun {
            cfg: self.cfg.clone(),
            basis,
            sol,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(example={:?}, M={}, N={}, rho={})",
            self.cfg.example, self.cfg.steps, self.cfg.cutoff, self.cfg.rho
        )
    }
}

/// A completed solve.
#[pyclass(name = "Run", frozen)]
struct PyRun {
    cfg: ModelConfig,
    basis: solver::BasisSet,
    sol: solver::Solution,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn blowup(&self) -> Option<(usize, usize, f64)> {
        self.sol.blowup.as_ref().map(|b| (b.i, b.j, b.norm))
    }

    #[getter]
    fn t_nodes(&self) -> Vec<f64> {
        self.sol.grid.t_nodes.clone()
    }

    #[getter]
    fn a_nodes(&self) -> Vec<f64> {
        self.sol.grid.a_nodes.clone()
    }

    #[getter]
    fn x_nodes(&self) -> Vec<f64> {
        self.sol.grid.x_nodes.clone()
    }

    /// Coefficient vector `V_j^i`.
    fn coefficients(&self, i: usize, j: usize) -> PyResult<Vec<f64>> {
        let f = &self.sol.field;
        if i >= f.n_t() || j >= f.n_a() {
            return Err(PyValueError::new_err(format!(
                "node ({i}, {j}) out of range"
            )));
        }
        Ok(f.get(i, j).to_vec())
    }

    /// `(t, p)` lists of the total population.
    fn population(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let s = postprocess::population_series(&self.sol, &self.basis, &self.cfg).map_err(to_py)?;
        Ok((s.t, s.p))
    }

    /// Density at the lattice time nearest `t`, as rows over age of values over x.
    fn density(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        let i = stepper::time_index(&self.sol.grid, t).map_err(to_py)?;
        let d = stepper::reconstruct(
            &self.sol.field,
            &self.basis,
            &self.cfg,
            &self.sol.grid,
            &[i],
        )
        .map_err(to_py)?;
        let n_x = d.x_nodes.len();
        Ok(d.slices[0].chunks(n_x).map(<[f64]>::to_vec).collect())
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let row = SummaryRow::from_solution(&self.cfg, &self.sol);
        let r = &self.sol.report;
        let d = PyDict::new(py);
        d.set_item("C", r.c)?;
        d.set_item("S_inv_frob", r.s_inv_frob)?;
        d.set_item("P_sum", r.p_sum)?;
        d.set_item("dt", r.dt)?;
        d.set_item("dt_admissible", r.dt_admissible)?;
        d.set_item("max_norm_observed", r.max_norm_observed)?;
        d.set_item("bound_2C", r.bound_2c)?;
        d.set_item("within_bound", r.within_bound)?;
        d.set_item("amplification", r.amplification)?;
        d.set_item("blowup_node", row.blowup_node)?;
        Ok(d)
    }

    /// Writes density, population and summary CSV files into `out`.
    fn export(&self, out: PathBuf, times: Vec<f64>) -> PyResult<()> {
        std::fs::create_dir_all(&out).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let idx = times
            .iter()
            .map(|&t| stepper::time_index(&self.sol.grid, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let d = stepper::reconstruct(
            &self.sol.field,
            &self.basis,
            &self.cfg,
            &self.sol.grid,
            &idx,
        )
        .map_err(to_py)?;
        postprocess::export_density(&d, &out).map_err(to_py)?;
        let (t, p) = self.population()?;
        postprocess::export_population(
            &postprocess::ObservableSeries { t, p },
            &out.join("total_population.csv"),
        )
        .map_err(to_py)?;
        let row = SummaryRow::from_solution(&self.cfg, &self.sol);
        postprocess::export_summary(&[row], &out.join("summary.csv")).map_err(to_py)
    }
}

/// Values of the first `cutoff` basis functions (or a derivative) at `xs`.
#[pyfunction]
#[pyo3(signature = (cutoff, xs, order = 0, ell = 1.0))]
fn basis_values(cutoff: usize, xs: Vec<f64>, order: usize, ell: f64) -> PyResult<Vec<Vec<f64>>> {
    let basis = solver::build_basis(cutoff, ell).map_err(to_py)?;
    let m = solver::eval_basis(&basis, order, &xs).map_err(to_py)?;
    Ok((0..cutoff)
        .map(|n| m.row(n).iter().copied().collect())
        .collect())
}

/// Structure matrices `S`, `κ` and the slices `ς_m` as nested lists.
#[pyfunction]
#[pyo3(signature = (cutoff, ell = 1.0))]
fn structure<'py>(py: Python<'py>, cutoff: usize, ell: f64) -> PyResult<Bound<'py, PyDict>> {
    let basis = solver::build_basis(cutoff, ell).map_err(to_py)?;
    let sys = solver::assemble_structure(&basis).map_err(to_py)?;
    let rows = |a: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        a.row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    let d = PyDict::new(py);
    d.set_item("S", rows(&sys.s))?;
    d.set_item("S_inv", rows(&sys.s_inv))?;
    d.set_item("kappa", rows(&sys.kappa))?;
    d.set_item("sigma", sys.sigma.iter().map(rows).collect::<Vec<_>>())?;
    Ok(d)
}

/// `(example, N, E_max %)` rows of the truncation study.
#[pyfunction]
#[pyo3(signature = (example, cutoffs = vec![2, 4, 6], grid = "uniform41"))]
fn truncation_study(
    example: u32,
    cutoffs: Vec<usize>,
    grid: &str,
) -> PyResult<Vec<(u32, usize, f64)>> {
    let g = EmaxGrid::parse(grid)
        .ok_or_else(|| PyValueError::new_err(format!("unknown grid {grid:?}")))?;
    let rows = postprocess::truncation_study(example, &cutoffs, g).map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.example, r.cutoff, r.e_max_percent))
        .collect())
}

#[pyfunction]
fn phi(f: f64) -> PyResult<f64> {
    stability::phi(f).map_err(to_py)
}

#[pyfunction]
fn phi_inv(g: f64) -> PyResult<f64> {
    stability::phi_inv(g).map_err(to_py)
}

#[pyfunction]
fn amplification(c: f64) -> f64 {
    stability::amplification(c)
}

#[pyfunction]
fn dt_admissible(dt: f64, s_inv_frob: f64, p_sum: f64, c: f64) -> bool {
    stability::dt_admissible(dt, s_inv_frob, p_sum, c)
}

#[pymodule]
fn fkgompertz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(basis_values, m)?)?;
    m.add_function(wrap_pyfunction!(structure, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_study, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(phi_inv, m)?)?;
    m.add_function(wrap_pyfunction!(amplification, m)?)?;
    m.add_function(wrap_pyfunction!(dt_admissible, m)?)?;
    Ok(())
}

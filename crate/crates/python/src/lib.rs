//! Python bindings for the qbridge solver and effective model.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qbridge::effective::EffectiveModel;
use qbridge::observables::{self, RelaxationRates};
use qbridge::solver::Solution;
use qbridge::{Branch, Error, SolverConfig, SystemParams, TransformAngles};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::SolverFailure { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn config(branch: &str) -> PyResult<SolverConfig> {
    let branch: Branch = branch.parse().map_err(to_py)?;
    Ok(SolverConfig {
        branch,
        ..SolverConfig::default()
    })
}

/// Physical parameters with ħ = 1.
#[pyclass(name = "SystemParams", from_py_object)]
#[derive(Clone)]
struct PySystemParams {
    inner: SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (n, g, f, omega_r=4.0, omega_q=5.0, omega_a=None, gamma=1.0, gamma_prime=1.0, kappa=12.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        g: f64,
        f: f64,
        omega_r: f64,
        omega_q: f64,
        omega_a: Option<f64>,
        gamma: f64,
        gamma_prime: f64,
        kappa: f64,
    ) -> PyResult<Self> {
        let inner = SystemParams::new(n, g, f)
            .with_frequencies(omega_r, omega_q, omega_a.unwrap_or(omega_q))
            .with_rates(gamma, gamma_prime, kappa);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn f(&self) -> f64 {
        self.inner.f
    }

    #[getter]
    fn omega_r(&self) -> f64 {
        self.inner.omega_r
    }

    #[getter]
    fn omega_q(&self) -> f64 {
        self.inner.omega_q
    }

    #[getter]
    fn omega_a(&self) -> f64 {
        self.inner.omega_a
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn delta_prime(&self) -> f64 {
        self.inner.delta_prime()
    }

    /// Hamiltonian in the single-excitation basis as a list of rows.
    fn hamiltonian(&self) -> PyResult<Vec<Vec<f64>>> {
        qbridge::build_hamiltonian(&self.inner)
            .map(|h| h.rows())
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(n={}, g={}, f={}, omega_r={}, omega_q={}, omega_a={})",
            p.n, p.g, p.f, p.omega_r, p.omega_q, p.omega_a
        )
    }
}

#[pyclass(name = "TransformAngles", frozen, from_py_object)]
#[derive(Clone)]
struct PyAngles {
    inner: TransformAngles,
}

#[pymethods]
impl PyAngles {
    #[new]
    #[pyo3(signature = (n, phi, theta, delta_prime, eta=None))]
    fn new(n: usize, phi: f64, theta: f64, delta_prime: f64, eta: Option<f64>) -> Self {
        let mut inner = TransformAngles::new(n, phi, theta, delta_prime);
        inner.eta = eta;
        Self { inner }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.inner.phi
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    #[getter]
    fn eta(&self) -> Option<f64> {
        self.inner.eta
    }

    #[getter]
    fn delta_prime(&self) -> f64 {
        self.inner.delta_prime
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    /// First-stage rotation as a list of rows.
    fn unitary(&self) -> Vec<Vec<f64>> {
        qbridge::transform::assemble_u(&self.inner).rows()
    }

    fn __repr__(&self) -> String {
        let a = &self.inner;
        format!(
            "TransformAngles(n={}, phi={}, theta={}, delta_prime={}, eta={:?})",
            a.n, a.phi, a.theta, a.delta_prime, a.eta
        )
    }
}

#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn angles(&self) -> PyAngles {
        PyAngles {
            inner: self.inner.angles,
        }
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn condition_residual(&self) -> f64 {
        self.inner.condition_residual
    }

    #[getter]
    fn branch(&self) -> &'static str {
        self.inner.branch.name()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn delta_prime_indeterminate(&self) -> bool {
        self.inner.delta_prime_indeterminate
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }
}

#[pyclass(name = "EffectiveModel", frozen)]
struct PyModel {
    inner: EffectiveModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn e_q(&self) -> f64 {
        self.inner.e_q
    }

    #[getter]
    fn e_a(&self) -> f64 {
        self.inner.e_a
    }

    #[getter]
    fn j_q(&self) -> f64 {
        self.inner.j_q
    }

    #[getter]
    fn j_a(&self) -> f64 {
        self.inner.j_a
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn eps_nq(&self) -> f64 {
        self.inner.eps_nq
    }

    #[getter]
    fn eps_na(&self) -> f64 {
        self.inner.eps_na
    }

    #[getter]
    fn j_n(&self) -> f64 {
        self.inner.j_n
    }

    #[getter]
    fn omega_q_eff(&self) -> Option<f64> {
        self.inner.omega_q_eff
    }

    #[getter]
    fn omega_a_eff(&self) -> Option<f64> {
        self.inner.omega_a_eff
    }

    /// Two-level star Hamiltonian as a list of rows.
    fn h_star(&self) -> Vec<Vec<f64>> {
        self.inner.h_star().rows()
    }
}

#[pyclass(name = "Analysis", frozen)]
struct PyAnalysis {
    #[pyo3(get)]
    params: PySystemParams,
    solution: Solution,
    #[pyo3(get)]
    angles: PyAngles,
    model: EffectiveModel,
}

#[pymethods]
impl PyAnalysis {
    #[getter]
    fn solution(&self) -> PySolution {
        PySolution {
            inner: self.solution,
        }
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel { inner: self.model }
    }
}

/// Solves the decoupling conditions for the given parameters.
#[pyfunction]
#[pyo3(signature = (params, branch="large"))]
fn solve(py: Python<'_>, params: &PySystemParams, branch: &str) -> PyResult<PySolution> {
    let cfg = config(branch)?;
    let p = params.inner;
    let inner = py.detach(|| qbridge::solve(&p, &cfg)).map_err(to_py)?;
    Ok(PySolution { inner })
}

/// Solves and builds the effective model.
#[pyfunction]
#[pyo3(signature = (params, branch="large"))]
fn analyze(py: Python<'_>, params: &PySystemParams, branch: &str) -> PyResult<PyAnalysis> {
    let cfg = config(branch)?;
    let p = params.inner;
    let a = py.detach(|| qbridge::analyze(&p, &cfg)).map_err(to_py)?;
    Ok(PyAnalysis {
        params: PySystemParams { inner: a.params },
        solution: a.solution,
        angles: PyAngles { inner: a.angles },
        model: a.model,
    })
}

/// Returns (c_odd, c_even, c_bridge, fidelity) of the transported W state.
#[pyfunction]
fn w_decomposition(angles: &PyAngles) -> PyResult<(f64, f64, f64, f64)> {
    let w = observables::w_decomposition(&angles.inner).map_err(to_py)?;
    Ok((w.c_odd, w.c_even, w.c_bridge, w.fidelity))
}

/// Ground and excited hybrid states for two qubits.
#[pyfunction]
fn hybrid_eigenstates(angles: &PyAngles) -> PyResult<(Vec<f64>, Vec<f64>)> {
    observables::hybrid_eigenstates(&angles.inner).map_err(to_py)
}

/// Returns (gamma_g, gamma_e) for two qubits using the rates stored in `params`.
#[pyfunction]
#[pyo3(signature = (params, branch="large"))]
fn decay_rates(params: &PySystemParams, branch: &str) -> PyResult<(f64, f64)> {
    let cfg = config(branch)?;
    let a = qbridge::analyze(&params.inner, &cfg).map_err(to_py)?;
    let (ground, _) = observables::hybrid_eigenstates(&a.angles).map_err(to_py)?;
    let rates = RelaxationRates::of(&params.inner);
    let d = observables::decay_rates(&ground, a.angles.phi, &rates).map_err(to_py)?;
    Ok((d.gamma_g, d.gamma_e))
}

/// Labeled single-excitation spectrum as (label, energy, ambiguous) tuples.
#[pyfunction]
#[pyo3(signature = (params, branch="large"))]
fn labeled_spectrum(params: &PySystemParams, branch: &str) -> PyResult<Vec<(String, f64, bool)>> {
    let a = qbridge::analyze(&params.inner, &config(branch)?).map_err(to_py)?;
    let s = observables::labeled_spectrum(&a.params, &a.angles).map_err(to_py)?;
    Ok(s.levels
        .into_iter()
        .map(|l| (l.label.to_string(), l.energy, l.ambiguous))
        .collect())
}

#[pymodule]
fn qbridge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyAngles>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(w_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(hybrid_eigenstates, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rates, m)?)?;
    m.add_function(wrap_pyfunction!(labeled_spectrum, m)?)?;
    Ok(())
}

//! Python bindings for the ring blow-up toolkit.
//!
//! Exposes the closed-form profile pieces, the star history, the reduced
//! ring ODE, and the admissibility checks — enough to sanity-check the
//! library from a notebook without going through the CLI.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use ringblow::corrections;
use ringblow::profile;
use ringblow::reduced_dynamics::{self, StarHistory};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// U(y) = α₀ / (1 + |y|²), the round bubble.
#[pyfunction]
fn bubble(y: [f64; 4]) -> f64 {
    profile::bubble(y)
}

/// U as a function of ρ = |y|.
#[pyfunction]
fn bubble_radial(rho: f64) -> f64 {
    profile::bubble_radial(rho)
}

/// Kernel elements of the linearization: j = 1..4 translations, 5 dilation.
#[pyfunction]
fn kernel_z(j: usize, y: [f64; 4]) -> PyResult<f64> {
    if !(1..=5).contains(&j) {
        return Err(PyValueError::new_err("j must be in 1..=5"));
    }
    Ok(profile::kernel_z(j, y))
}

/// C¹ cutoff: 1 on (−∞, 1], 0 on [2, ∞).
#[pyfunction]
fn eta(x: f64) -> f64 {
    profile::eta(x)
}

/// The model scale λ*(t) = |log T| (T−t) / log²(T−t).
#[pyfunction]
fn lambda_star(t: f64, t_end: f64) -> f64 {
    reduced_dynamics::lambda_star(t, t_end)
}

/// The model ring radius ξ_r*(t) = √(2(n−4)(T−t)).
#[pyfunction]
fn xi_r_star(t: f64, t_end: f64, n: usize) -> f64 {
    reduced_dynamics::xi_r_star(t, t_end, n)
}

/// Γ(τ), the memory-kernel trace of the reduced λ equation.
#[pyfunction]
fn gamma(tau: f64) -> f64 {
    reduced_dynamics::gamma(tau)
}

/// Positive eigenvalue μ₀ of L₀ = Δ + 3U² (ground state).
#[pyfunction]
fn mu0() -> PyResult<f64> {
    Ok(profile::solve_eigenpair(30.0, 1e-10).map_err(err)?.mu0)
}

/// The constant block as a dict: c0, c0_bold, c_star, mu0, kappa_star, ...
#[pyfunction]
#[pyo3(signature = (a_star = -1.0))]
fn constants(py: Python<'_>, a_star: f64) -> PyResult<Py<PyDict>> {
    let c = reduced_dynamics::compute_constants(a_star).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("alpha0", c.alpha0)?;
    d.set_item("c0", c.c0)?;
    d.set_item("c0_bold", c.c0_bold)?;
    d.set_item("c_star", c.c_star)?;
    d.set_item("mu0", c.mu0)?;
    d.set_item("kappa_star", c.kappa_star)?;
    d.set_item("kappa_star_sign_flag", c.kappa_star_sign_flag)?;
    d.set_item("a_star", c.a_star)?;
    Ok(d.into())
}

/// Ψ₀(ρ, t) for the λ = λ* history (dimension n, horizon t_end).
#[pyfunction]
#[pyo3(signature = (rho, t, t_end = 0.05, n = 5, tol = 1e-10))]
fn psi0(rho: f64, t: f64, t_end: f64, n: usize, tol: f64) -> f64 {
    corrections::psi0(rho, t, &StarHistory { t_end, n }, tol)
}

/// Violated conditions for the printed ε-family (empty when admissible).
/// `beta` overrides the family's β when given.
#[pyfunction]
#[pyo3(signature = (n, eps, nu2 = 0.9, sigma = 0.01, beta = None))]
fn validate_family(
    n: usize,
    eps: f64,
    nu2: f64,
    sigma: f64,
    beta: Option<f64>,
) -> PyResult<Vec<String>> {
    let mut fam = reduced_dynamics::printed_family(n, eps, nu2, sigma).map_err(err)?;
    if let Some(b) = beta {
        fam.beta = b;
    }
    Ok(reduced_dynamics::validate_parameter_set(&fam)
        .into_iter()
        .map(|v| v.condition)
        .collect())
}

/// Zero-forcing ring ODE on a uniform m-node grid: returns (t, xi_r).
#[pyfunction]
#[pyo3(signature = (t_end, n, m = 200))]
fn solve_xi(t_end: f64, n: usize, m: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if m < 2 {
        return Err(PyValueError::new_err("m must be at least 2"));
    }
    let grid: Vec<f64> = (0..=m).map(|k| t_end * k as f64 / m as f64).collect();
    let sol = reduced_dynamics::solve_xi(t_end, n, &grid, &|_| 0.0, &|_| [0.0; 3], [0.0; 3])
        .map_err(err)?;
    Ok((sol.t, sol.xi_r))
}

#[pymodule]
fn ringblow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ALPHA0", profile::ALPHA0)?;
    m.add_function(wrap_pyfunction!(bubble, m)?)?;
    m.add_function(wrap_pyfunction!(bubble_radial, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_z, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(xi_r_star, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(mu0, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(psi0, m)?)?;
    m.add_function(wrap_pyfunction!(validate_family, m)?)?;
    m.add_function(wrap_pyfunction!(solve_xi, m)?)?;
    Ok(())
}

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use varcycle::cycle::{self, CycleRegime, ScalarNoise};
use varcycle::model::{self, NoiseSpec, RawParams};
use varcycle::moments::{self, MomentInputs};
use varcycle::simulate::{self as sim, aggregate_state};
use varcycle::spectral::{self, Regime};

create_exception!(pyvarcycle, VarcycleError, PyValueError);

fn err(e: varcycle::Error) -> PyErr {
    VarcycleError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>], dim: usize) -> PyResult<DMatrix<f64>> {
    if r.len() != dim || r.iter().any(|row| row.len() != dim) {
        return Err(VarcycleError::new_err(format!("expected a {dim} x {dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| r[i][j]))
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::ComplexConjugate => "complex_conjugate",
        Regime::DiagonalizableReal => "diagonalizable_real",
        Regime::RepeatedRootJordan => "repeated_root_jordan",
    }
}

fn noise_spec(n: usize, noise_sd: f64, mu: Option<Vec<f64>>) -> NoiseSpec {
    match mu {
        Some(mu) => NoiseSpec::new(mu, vec![noise_sd; 2 * n]),
        None => NoiseSpec::isotropic(n, noise_sd),
    }
}

/// Validated model parameters. Weights default to uniform.
#[pyclass(name = "ModelParams", frozen)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n, alpha, beta, a=None, b=None))]
    fn new(n: usize, alpha: f64, beta: f64, a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> PyResult<Self> {
        let uniform = vec![1.0 / n.max(1) as f64; n];
        let raw = RawParams {
            n,
            alpha,
            beta,
            a: a.unwrap_or_else(|| uniform.clone()),
            b: b.unwrap_or(uniform),
        };
        Ok(Self {
            inner: model::validate_params(&raw).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.inner.a().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().to_vec()
    }

    fn transition_matrix(&self) -> Vec<Vec<f64>> {
        rows(model::build_transition_matrix(&self.inner).entries())
    }

    fn characteristic_polynomial(&self, lam: f64) -> f64 {
        spectral::characteristic_polynomial(&self.inner, lam)
    }

    fn decompose(&self) -> PyDecomposition {
        PyDecomposition {
            inner: spectral::decompose(&self.inner),
            params: self.inner.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(n={}, alpha={}, beta={})", self.inner.n(), self.inner.alpha(), self.inner.beta())
    }
}

#[pyclass(name = "Decomposition", frozen)]
struct PyDecomposition {
    inner: spectral::SpectralDecomposition,
    params: model::ModelParams,
}

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn regime(&self) -> &'static str {
        regime_name(self.inner.regime)
    }

    #[getter]
    fn d1(&self) -> f64 {
        self.inner.boundaries.d1
    }

    #[getter]
    fn d2(&self) -> f64 {
        self.inner.boundaries.d2
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.boundaries.delta
    }

    /// `(re, im, multiplicity)` triples.
    #[getter]
    fn eigenvalues(&self) -> Vec<(f64, f64, usize)> {
        self.inner
            .eig
            .with_multiplicity()
            .iter()
            .map(|(l, m)| (l.re, l.im, *m))
            .collect()
    }

    #[getter]
    fn max_modulus(&self) -> f64 {
        self.inner.eig.max_modulus()
    }

    /// `(tau_minus, tau_plus, tau_tilde)` or None.
    #[getter]
    fn tau(&self) -> Option<(f64, f64, f64)> {
        self.inner.scales.map(|s| (s.tau_minus, s.tau_plus, s.tau_tilde))
    }

    #[getter]
    fn q(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.basis.as_ref().map(|b| rows(&b.q))
    }

    #[getter]
    fn q_inv(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.basis.as_ref().map(|b| rows(&b.q_inv))
    }

    /// `(|MQ - QJ|, |QQ^-1 - I|, passed)`.
    #[pyo3(signature = (tol=1e-10))]
    fn verify(&self, tol: f64) -> PyResult<(f64, f64, bool)> {
        let r = spectral::verify(&self.params, &self.inner, tol).map_err(err)?;
        Ok((r.mq_minus_qj, r.q_qinv_minus_identity, r.passed))
    }
}

/// States `z_0..z_T` as lists.
#[pyfunction]
#[pyo3(signature = (params, steps, seed, method="recursive", noise_sd=1.0, z0=None))]
fn simulate(
    params: &PyModelParams,
    steps: usize,
    seed: u64,
    method: &str,
    noise_sd: f64,
    z0: Option<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let p = &params.inner;
    let z0 = DVector::from_vec(z0.unwrap_or_else(|| vec![0.0; p.dim()]));
    let noise = sim::sample_noise_path(&NoiseSpec::isotropic(p.n(), noise_sd), p, steps, seed).map_err(err)?;
    let tr = match method {
        "recursive" => sim::simulate_recursive(&model::build_transition_matrix(p), &z0, &noise),
        "explicit" => sim::simulate_explicit(&spectral::decompose(p), &z0, &noise),
        other => return Err(VarcycleError::new_err(format!("unknown method `{other}`"))),
    }
    .map_err(err)?;
    Ok(tr.z.iter().map(|z| z.iter().copied().collect()).collect())
}

/// `(xbar, ybar)` for a list of states.
#[pyfunction]
fn aggregates(params: &PyModelParams, states: Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    states
        .into_iter()
        .map(|z| aggregate_state(&DVector::from_vec(z), &params.inner))
        .unzip()
}

/// `Cov(z_{t+tau}, z_t)` in original coordinates.
#[pyfunction]
#[pyo3(signature = (params, t, tau, noise_sd=1.0, g=None))]
fn cross_covariance(
    params: &PyModelParams,
    t: usize,
    tau: usize,
    noise_sd: f64,
    g: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<Vec<f64>>> {
    let p = &params.inner;
    let dim = p.dim();
    let g = match g {
        Some(r) => from_rows(&r, dim)?,
        None => DMatrix::zeros(dim, dim),
    };
    let inputs = MomentInputs::from_noise(p, &NoiseSpec::isotropic(p.n(), noise_sd), g).map_err(err)?;
    let c = moments::cross_covariance(&inputs, &spectral::decompose(p), t, tau).map_err(err)?;
    Ok(rows(&c.original))
}

#[pyfunction]
#[pyo3(signature = (params, t_grid, tau_grid, noise_sd=1.0))]
fn stationarity_gap(params: &PyModelParams, t_grid: Vec<usize>, tau_grid: Vec<usize>, noise_sd: f64) -> PyResult<f64> {
    let p = &params.inner;
    let dim = p.dim();
    let inputs =
        MomentInputs::from_noise(p, &NoiseSpec::isotropic(p.n(), noise_sd), DMatrix::zeros(dim, dim)).map_err(err)?;
    let rep = moments::stationarity_diagnostic(&inputs, &spectral::decompose(p), &t_grid, &tau_grid).map_err(err)?;
    Ok(rep.stationarity_gap)
}

/// `(limiting_mean, ma_covariance, claimed_covariance, discrepancy)`.
#[pyfunction]
#[pyo3(signature = (params, mu=None, noise_sd=1.0, tail_tol=1e-12))]
fn limiting_moments(
    params: &PyModelParams,
    mu: Option<Vec<f64>>,
    noise_sd: f64,
    tail_tol: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    let p = &params.inner;
    let dim = p.dim();
    let inputs = MomentInputs::from_noise(p, &noise_spec(p.n(), noise_sd, mu), DMatrix::zeros(dim, dim)).map_err(err)?;
    let l = moments::limiting_moments(&inputs, &spectral::decompose(p), tail_tol).map_err(err)?;
    Ok((
        l.limiting_mean.iter().copied().collect(),
        rows(&l.ma_infinity_cov),
        rows(&l.propagated_limit_cov),
        l.covariance_discrepancy,
    ))
}

#[pyclass(name = "CycleModel", frozen)]
struct PyCycleModel {
    inner: cycle::CycleModel,
}

#[pymethods]
impl PyCycleModel {
    #[new]
    fn new(alpha: f64, beta: f64) -> Self {
        Self {
            inner: cycle::reduce_to_cycle(alpha, beta),
        }
    }

    #[getter]
    fn kappa1(&self) -> f64 {
        self.inner.kappa1
    }

    #[getter]
    fn kappa2(&self) -> f64 {
        self.inner.kappa2
    }

    #[getter]
    fn delta1(&self) -> f64 {
        self.inner.delta1
    }

    #[getter]
    fn rho_mod(&self) -> f64 {
        self.inner.rho_mod
    }

    #[getter]
    fn omega(&self) -> Option<f64> {
        self.inner.omega
    }

    #[getter]
    fn period(&self) -> Option<f64> {
        self.inner.period()
    }

    #[getter]
    fn invertible(&self) -> bool {
        self.inner.invertible
    }

    #[getter]
    fn regime(&self) -> &'static str {
        match self.inner.regime {
            CycleRegime::ComplexOscillatory => "complex_oscillatory",
            CycleRegime::DistinctReal => "distinct_real",
            CycleRegime::RepeatedReal => "repeated_real",
        }
    }

    fn fit_constants(&self, x0: f64, x1: f64) -> PyResult<(f64, f64)> {
        cycle::fit_constants(&self.inner, x0, x1).map_err(err)
    }

    fn homogeneous_solution(&self, c1: f64, c2: f64, t_max: usize) -> PyResult<Vec<f64>> {
        Ok(cycle::homogeneous_solution(&self.inner, c1, c2, t_max).map_err(err)?.values)
    }

    #[pyo3(signature = (h, trunc_tol=1e-10))]
    fn particular_solution(&self, h: Vec<f64>, trunc_tol: f64) -> PyResult<Vec<f64>> {
        cycle::particular_solution(&self.inner, &h, trunc_tol).map_err(err)
    }

    /// `(xbar, h)` for `t = 0..=T`.
    #[pyo3(signature = (steps, seed, eps_sd=1.0, eta_sd=1.6, x0=0.0, x1=0.0))]
    fn simulate(
        &self,
        steps: usize,
        seed: u64,
        eps_sd: f64,
        eta_sd: f64,
        x0: f64,
        x1: f64,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let m = &self.inner;
        let noise = ScalarNoise::sample(steps, (0.0, eps_sd), (0.0, eta_sd), seed).map_err(err)?;
        let x = cycle::simulate_cycle(m, &noise, x0, x1, steps).map_err(err)?;
        let h = cycle::forcing_series(&noise, m.alpha, m.beta, steps + 1).map_err(err)?;
        Ok((x, h))
    }

    fn __repr__(&self) -> String {
        format!("CycleModel(alpha={}, beta={})", self.inner.alpha, self.inner.beta)
    }
}

/// `(frequency, period, prominence, stable)`.
#[pyfunction]
fn dominant_period(series: Vec<f64>) -> PyResult<(f64, f64, f64, bool)> {
    let e = varcycle::periodogram::dominant_period(&series).map_err(err)?;
    Ok((e.frequency, e.period, e.prominence, e.stable))
}

#[pymodule]
fn pyvarcycle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VarcycleError", m.py().get_type::<VarcycleError>())?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyCycleModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(aggregates, m)?)?;
    m.add_function(wrap_pyfunction!(cross_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(stationarity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(limiting_moments, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_period, m)?)?;
    Ok(())
}

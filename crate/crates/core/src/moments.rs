//! Second moments of the state process.
//!
//! With `z0` independent of the i.i.d. shocks, the transformed states
//! `z~_t = Q^{-1} z_t` have cross-covariances
//!
//! ```text
//! Cov(z~_{t+s}, z~_t) = J^{t+s} G~ J^t + sum_{i=0}^{t-1} J^{s+i} S~ J^i
//! ```
//!
//! where `G~ = Q^{-1} G Q^{-T}` and `S~ = Q^{-1} Sigma0 Q^{-T}`. Since `J` is
//! diagonal here every product `J^p X J^q` is an entrywise scaling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_transition_matrix, ModelParams, NoiseSpec};
use crate::simulate::{draw_noise, replication_seed, rng_from_seed};
use crate::spectral::{EigenStructure, SpectralDecomposition};

/// Smallest `t` for which the cross-covariance formula is evaluated.
pub const MIN_T: usize = 2;

/// Moments of the initial state and of the shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentInputs {
    /// Covariance of `z0`.
    pub g: DMatrix<f64>,
    /// Covariance of `gamma_t`: `diag(alpha^2 sigma_i^2, beta^2 sigma_{n+i}^2)`.
    pub sigma0: DMatrix<f64>,
    /// Mean of `gamma_t`: `(alpha mu_i, -beta mu_{n+i})`.
    pub mu_gamma: DVector<f64>,
}

impl MomentInputs {
    pub fn new(g: DMatrix<f64>, sigma0: DMatrix<f64>, mu_gamma: DVector<f64>) -> Result<Self> {
        let dim = mu_gamma.len();
        for (what, m) in [("g", &g), ("sigma0", &sigma0)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: dim,
                    found: m.nrows(),
                });
            }
        }
        let scale = g.amax().max(1.0);
        if (&g - g.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidMoments("G is not symmetric".into()));
        }
        if min_symmetric_eigenvalue(&g) < -1e-12 * scale {
            return Err(Error::InvalidMoments("G is not positive semidefinite".into()));
        }
        for i in 0..dim {
            for j in 0..dim {
                let v = sigma0[(i, j)];
                if (i == j && v < 0.0) || (i != j && v != 0.0) {
                    return Err(Error::InvalidMoments("Sigma0 must be diagonal and nonnegative".into()));
                }
            }
        }
        Ok(Self { g, sigma0, mu_gamma })
    }

    /// Builds the shock moments from a noise law.
    pub fn from_noise(params: &ModelParams, spec: &NoiseSpec, g: DMatrix<f64>) -> Result<Self> {
        spec.validate(params)?;
        let n = params.n();
        let (alpha, beta) = (params.alpha(), params.beta());
        let coef = |i: usize| if i < n { alpha } else { beta };
        let sigma0 = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i == j {
                let s = coef(i) * spec.effective_sigma(i);
                s * s
            } else {
                0.0
            }
        });
        let mu_gamma = DVector::from_fn(2 * n, |i, _| if i < n { alpha * spec.mu[i] } else { -beta * spec.mu[i] });
        Self::new(g, sigma0, mu_gamma)
    }
}

pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// `min eig >= -tol * max(trace, 1)`.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    min_symmetric_eigenvalue(m) >= -tol * m.trace().abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    pub t: usize,
    pub tau: usize,
    /// `Cov(z~_{t+tau}, z~_t)`
    pub transformed: DMatrix<f64>,
    /// `Cov(z_{t+tau}, z_t) = Q (transformed) Q^T`
    pub original: DMatrix<f64>,
}

/// Inputs mapped into eigen-coordinates once, for repeated grid evaluation.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    d: DVector<f64>,
    q: DMatrix<f64>,
    g_t: DMatrix<f64>,
    s_t: DMatrix<f64>,
}

impl CovarianceModel {
    pub fn new(inputs: &MomentInputs, dec: &SpectralDecomposition) -> Result<Self> {
        let (d, basis) = dec.diagonal_basis()?;
        if inputs.mu_gamma.len() != d.len() {
            return Err(Error::DimensionMismatch {
                what: "moment inputs",
                expected: d.len(),
                found: inputs.mu_gamma.len(),
            });
        }
        let qi = &basis.q_inv;
        Ok(Self {
            g_t: qi * &inputs.g * qi.transpose(),
            s_t: qi * &inputs.sigma0 * qi.transpose(),
            q: basis.q.clone(),
            d,
        })
    }

    pub fn transformed_g(&self) -> &DMatrix<f64> {
        &self.g_t
    }

    pub fn transformed_sigma0(&self) -> &DMatrix<f64> {
        &self.s_t
    }

    pub fn cross_covariance(&self, t: usize, tau: usize) -> Result<CrossCovariance> {
        if t < MIN_T {
            return Err(Error::RangeError { t, min: MIN_T });
        }
        let d = &self.d;
        let dim = d.len();
        let mut out = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let lag = d[j].powi(tau as i32);
            for k in 0..dim {
                let r = d[j] * d[k];
                let mut noise = 0.0;
                let mut ri = 1.0;
                for _ in 0..t {
                    noise += ri;
                    ri *= r;
                }
                // ri == r^t here
                out[(j, k)] = lag * (ri * self.g_t[(j, k)] + noise * self.s_t[(j, k)]);
            }
        }
        let original = &self.q * &out * self.q.transpose();
        Ok(CrossCovariance {
            t,
            tau,
            transformed: out,
            original,
        })
    }
}

pub fn cross_covariance(
    inputs: &MomentInputs,
    dec: &SpectralDecomposition,
    t: usize,
    tau: usize,
) -> Result<CrossCovariance> {
    CovarianceModel::new(inputs, dec)?.cross_covariance(t, tau)
}

/// Monte Carlo estimate of a matrix with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McMatrixEstimate {
    pub estimate: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub replications: usize,
}

impl McMatrixEstimate {
    /// Largest `|estimate - reference| / stderr` over entries with nonzero
    /// standard error; entries with zero standard error must match exactly
    /// up to `1e-12`, else the score is infinite.
    pub fn max_z_score(&self, reference: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (e, r)) in self.estimate.iter().zip(reference.iter()).enumerate() {
            let se = self.stderr[i];
            let diff = (e - r).abs();
            let z = if se > 0.0 {
                diff / se
            } else if diff <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McVectorEstimate {
    pub estimate: DVector<f64>,
    pub stderr: DVector<f64>,
    pub replications: usize,
}

impl McVectorEstimate {
    pub fn max_z_score(&self, reference: &DVector<f64>) -> f64 {
        let est = DMatrix::from_column_slice(self.estimate.len(), 1, self.estimate.as_slice());
        let se = DMatrix::from_column_slice(self.stderr.len(), 1, self.stderr.as_slice());
        let r = DMatrix::from_column_slice(reference.len(), 1, reference.as_slice());
        McMatrixEstimate {
            estimate: est,
            stderr: se,
            replications: self.replications,
        }
        .max_z_score(&r)
    }
}

/// Sample cross-covariance of paired draws with entrywise standard errors
/// taken from the scatter of the centred products.
pub fn sample_cross_covariance(u: &[DVector<f64>], v: &[DVector<f64>]) -> McMatrixEstimate {
    let r = u.len();
    let (p, q) = (u[0].len(), v[0].len());
    let rf = r as f64;
    let mu = u.iter().fold(DVector::zeros(p), |acc, x| acc + x) / rf;
    let mv = v.iter().fold(DVector::zeros(q), |acc, x| acc + x) / rf;
    let mut sum = DMatrix::zeros(p, q);
    let mut sumsq = DMatrix::zeros(p, q);
    for (x, y) in u.iter().zip(v) {
        let prod = (x - &mu) * (y - &mv).transpose();
        sumsq += prod.component_mul(&prod);
        sum += prod;
    }
    let mean_prod = &sum / rf;
    let var_prod = (sumsq / rf - mean_prod.component_mul(&mean_prod)).map(|x| x.max(0.0)) * (rf / (rf - 1.0));
    McMatrixEstimate {
        estimate: &sum / (rf - 1.0),
        stderr: var_prod.map(|x| (x / rf).sqrt()),
        replications: r,
    }
}

/// Symmetric square root factor `L` with `L L^T = G`.
fn covariance_factor(g: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((g + g.transpose()) * 0.5);
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

/// Simulates `z` from a centred Gaussian `z0 ~ N(0, G)` under replication
/// seed streams, calling `visit(t, z_t)` for every `t` in `0..=horizon`.
fn replicate<F, T>(
    params: &ModelParams,
    spec: &NoiseSpec,
    g: &DMatrix<f64>,
    horizon: usize,
    replications: usize,
    seed: u64,
    init: impl Fn() -> T + Sync,
    visit: F,
) -> Result<Vec<T>>
where
    F: Fn(&mut T, usize, &DVector<f64>) + Sync,
    T: Send,
{
    spec.validate(params)?;
    let dim = params.dim();
    if g.nrows() != dim || g.ncols() != dim {
        return Err(Error::DimensionMismatch {
            what: "g",
            expected: dim,
            found: g.nrows(),
        });
    }
    let m = build_transition_matrix(params);
    let factor = covariance_factor(g);
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(replication_seed(seed, r));
            let white = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut z = &factor * white;
            let mut state = init();
            visit(&mut state, 0, &z);
            for t in 0..horizon {
                let draw = draw_noise(&mut rng, spec, params, t);
                z = m.entries() * &z + &draw.gamma;
                if !z.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteState { t: t + 1 });
                }
                visit(&mut state, t + 1, &z);
            }
            Ok(state)
        })
        .collect()
}

/// Monte Carlo estimate of `Cov(z_{t+tau}, z_t)` in original coordinates,
/// simulated with the literal recursion and `z0 ~ N(0, G)`.
pub fn monte_carlo_cross_covariance(
    params: &ModelParams,
    spec: &NoiseSpec,
    g: &DMatrix<f64>,
    t: usize,
    tau: usize,
    replications: usize,
    seed: u64,
) -> Result<McMatrixEstimate> {
    if replications < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "need at least 2".into(),
        });
    }
    let dim = params.dim();
    let pairs = replicate(
        params,
        spec,
        g,
        t + tau,
        replications,
        seed,
        || (DVector::zeros(dim), DVector::zeros(dim)),
        |state, s, z| {
            if s == t {
                state.1 = z.clone();
            }
            if s == t + tau {
                state.0 = z.clone();
            }
        },
    )?;
    let (late, early): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(sample_cross_covariance(&late, &early))
}

/// Long-run behaviour from simulation: the time average of `z_t` over
/// `burn_in..=horizon` per replication, and the cross-section of
/// `z_horizon` across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunEstimate {
    pub time_mean: McVectorEstimate,
    pub terminal_covariance: McMatrixEstimate,
}

pub fn monte_carlo_long_run(
    params: &ModelParams,
    spec: &NoiseSpec,
    g: &DMatrix<f64>,
    burn_in: usize,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<LongRunEstimate> {
    if burn_in > horizon || replications < 2 {
        return Err(Error::InvalidParameter {
            name: "burn_in/replications",
            reason: "need burn_in <= horizon and at least 2 replications".into(),
        });
    }
    let dim = params.dim();
    let span = (horizon - burn_in + 1) as f64;
    let states = replicate(
        params,
        spec,
        g,
        horizon,
        replications,
        seed,
        || (DVector::zeros(dim), DVector::zeros(dim)),
        |state, t, z| {
            if t >= burn_in {
                state.0 += z / span;
            }
            if t == horizon {
                state.1 = z.clone();
            }
        },
    )?;
    let rf = replications as f64;
    let (means, terminal): (Vec<_>, Vec<_>) = states.into_iter().unzip();
    let avg = means.iter().fold(DVector::zeros(dim), |acc, x| acc + x) / rf;
    let var = means
        .iter()
        .fold(DVector::zeros(dim), |acc: DVector<f64>, x| {
            let d = x - &avg;
            acc + d.component_mul(&d)
        })
        / (rf - 1.0);
    Ok(LongRunEstimate {
        time_mean: McVectorEstimate {
            estimate: avg,
            stderr: var.map(|v| (v / rf).sqrt()),
            replications,
        },
        terminal_covariance: sample_cross_covariance(&terminal, &terminal),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub entries: Vec<CrossCovariance>,
    /// Max over lags of the spread of `Cov(z~_{t+tau}, z~_t)` across `t`.
    pub stationarity_gap: f64,
    /// Same spread measured in original coordinates.
    pub stationarity_gap_original: f64,
    pub mc_estimate: Option<Vec<McMatrixEstimate>>,
}

fn spread<'a>(mats: impl Iterator<Item = &'a DMatrix<f64>> + Clone) -> f64 {
    let mut gap: f64 = 0.0;
    for (i, a) in mats.clone().enumerate() {
        for b in mats.clone().skip(i + 1) {
            gap = gap.max((a - b).amax());
        }
    }
    gap
}

/// Evaluates the covariance formula on `t_grid x tau_grid` and measures how
/// much covariances at a fixed lag move with `t`.
pub fn stationarity_diagnostic(
    inputs: &MomentInputs,
    dec: &SpectralDecomposition,
    t_grid: &[usize],
    tau_grid: &[usize],
) -> Result<CovarianceReport> {
    if t_grid.is_empty() || tau_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "t and tau grids must be nonempty".into(),
        });
    }
    let model = CovarianceModel::new(inputs, dec)?;
    let mut entries = Vec::with_capacity(t_grid.len() * tau_grid.len());
    for &tau in tau_grid {
        for &t in t_grid {
            entries.push(model.cross_covariance(t, tau)?);
        }
    }
    let mut gap: f64 = 0.0;
    let mut gap_orig: f64 = 0.0;
    for &tau in tau_grid {
        let same_lag = entries.iter().filter(|e| e.tau == tau);
        gap = gap.max(spread(same_lag.clone().map(|e| &e.transformed)));
        gap_orig = gap_orig.max(spread(same_lag.map(|e| &e.original)));
    }
    Ok(CovarianceReport {
        entries,
        stationarity_gap: gap,
        stationarity_gap_original: gap_orig,
        mc_estimate: None,
    })
}

/// `0 < max |lambda_i| < 1` over the four distinct eigenvalues.
pub fn stability_condition(eig: &EigenStructure) -> bool {
    let m = eig.max_modulus();
    m > 0.0 && m < 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    /// `1 / (1 - lambda_i)` for `lambda1, lambda2, lambda3, lambda4`.
    pub lambda_tilde: [f64; 4],
    pub condition45: bool,
    /// `Q diag(lambda~) Q^{-1} mu_gamma = (I - M)^{-1} mu_gamma`.
    pub limiting_mean: DVector<f64>,
    /// `A Sigma0 A^T` with `A = Q diag(lambda~) Q^{-1}`, the covariance of the
    /// distributional limit `A gamma_0`.
    pub propagated_limit_cov: DMatrix<f64>,
    /// `sum_i M^i Sigma0 (M^i)^T`, truncated after `truncation_terms` terms.
    pub ma_infinity_cov: DMatrix<f64>,
    pub truncation_terms: usize,
    /// Bound on the max-norm of the omitted tail (transformed coordinates).
    pub tail_bound: f64,
    /// `||propagated_limit_cov - ma_infinity_cov||_max`
    pub covariance_discrepancy: f64,
}

pub fn limiting_moments(inputs: &MomentInputs, dec: &SpectralDecomposition, tail_tol: f64) -> Result<LimitReport> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "tail_tol",
            reason: format!("{tail_tol} not in (0, 1)"),
        });
    }
    let model = CovarianceModel::new(inputs, dec)?;
    let (d, basis) = dec.diagonal_basis()?;
    let rho = dec.eig.max_modulus();
    if !stability_condition(&dec.eig) {
        return Err(Error::ConditionViolated { max_modulus: rho });
    }
    let quad = dec.eig.real_quadruple().expect("diagonalizable");
    let lambda_tilde = quad.map(|l| 1.0 / (1.0 - l));

    let dt = d.map(|l| 1.0 / (1.0 - l));
    let a = &basis.q * DMatrix::from_diagonal(&dt) * &basis.q_inv;
    let limiting_mean = &a * &inputs.mu_gamma;
    let propagated_limit_cov = &a * &inputs.sigma0 * a.transpose();

    let terms = ((tail_tol.ln() / rho.ln()).ceil() as usize).max(1);
    let s_t = model.transformed_sigma0();
    let dim = d.len();
    let mut acc = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for k in 0..dim {
            let r = d[j] * d[k];
            let mut ri = 1.0;
            let mut sum = 0.0;
            for _ in 0..=terms {
                sum += ri;
                ri *= r;
            }
            acc[(j, k)] = sum * s_t[(j, k)];
        }
    }
    let rho2 = rho * rho;
    let tail_bound = rho2.powi(terms as i32 + 1) / (1.0 - rho2) * s_t.amax();
    let ma_infinity_cov = &basis.q * acc * basis.q.transpose();
    let covariance_discrepancy = (&propagated_limit_cov - &ma_infinity_cov).amax();
    Ok(LimitReport {
        lambda_tilde,
        condition45: true,
        limiting_mean,
        propagated_limit_cov,
        ma_infinity_cov,
        truncation_terms: terms,
        tail_bound,
        covariance_discrepancy,
    })
}

/// Serializable summary of a [`LimitReport`].
#[derive(Debug, Clone, Serialize)]
pub struct LimitSummary {
    pub lambda_tilde: [f64; 4],
    pub condition45: bool,
    pub limiting_mean: Vec<f64>,
    pub truncation_terms: usize,
    pub tail_bound: f64,
    pub covariance_discrepancy: f64,
}

impl From<&LimitReport> for LimitSummary {
    fn from(r: &LimitReport) -> Self {
        Self {
            lambda_tilde: r.lambda_tilde,
            condition45: r.condition45,
            limiting_mean: r.limiting_mean.iter().copied().collect(),
            truncation_terms: r.truncation_terms,
            tail_bound: r.tail_bound,
            covariance_discrepancy: r.covariance_discrepancy,
        }
    }
}

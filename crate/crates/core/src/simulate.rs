//! Noise generation and the two trajectory routes: the literal recursion
//! `z_{t+1} = M z_t + gamma_t` and the explicit solution
//! `z_{t+1} = Q J^{t+1} Q^{-1} z_0 + sum_{i=0}^{t} Q J^i Q^{-1} gamma_{t-i}`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, NoiseSpec, TransitionMatrix};
use crate::spectral::SpectralDecomposition;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of Monte Carlo replication `r`: `splitmix64(base ^ splitmix64(r))`.
pub fn replication_seed(base: u64, r: u64) -> u64 {
    splitmix64(base ^ splitmix64(r))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shocks at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub t: usize,
    pub epsilon: DVector<f64>,
    pub eta: DVector<f64>,
    /// `(alpha epsilon, -beta eta)`
    pub gamma: DVector<f64>,
}

impl NoiseDraw {
    pub fn new(t: usize, epsilon: DVector<f64>, eta: DVector<f64>, alpha: f64, beta: f64) -> Self {
        let n = epsilon.len();
        let gamma = DVector::from_fn(2 * n, |i, _| {
            if i < n {
                alpha * epsilon[i]
            } else {
                -beta * eta[i - n]
            }
        });
        Self {
            t,
            epsilon,
            eta,
            gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub draws: Vec<NoiseDraw>,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

pub(crate) fn draw_noise<R: Rng>(rng: &mut R, spec: &NoiseSpec, params: &ModelParams, t: usize) -> NoiseDraw {
    let n = params.n();
    let mut sample = |i: usize| {
        let z: f64 = if spec.zero_noise { 0.0 } else { rng.sample(StandardNormal) };
        spec.mu[i] + spec.effective_sigma(i) * z
    };
    let epsilon = DVector::from_fn(n, |i, _| sample(i));
    let eta = DVector::from_fn(n, |i, _| sample(n + i));
    NoiseDraw::new(t, epsilon, eta, params.alpha(), params.beta())
}

/// Draws `steps` independent shock vectors. Coordinate `i` of `epsilon`
/// follows `N(mu_i, sigma_i^2)`, coordinate `i` of `eta` follows
/// `N(mu_{n+i}, sigma_{n+i}^2)`.
pub fn sample_noise_path(spec: &NoiseSpec, params: &ModelParams, steps: usize, seed: u64) -> Result<NoisePath> {
    spec.validate(params)?;
    let mut rng = rng_from_seed(seed);
    let draws = (0..steps).map(|t| draw_noise(&mut rng, spec, params, t)).collect();
    Ok(NoisePath { seed, draws })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Recursive,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `z_0 .. z_T`
    pub z: Vec<DVector<f64>>,
    pub noise: NoisePath,
    pub method: Method,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.z.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }

    pub fn max_abs(&self) -> f64 {
        self.z.iter().map(|z| z.amax()).fold(0.0, f64::max)
    }
}

fn check_dims(dim: usize, z0: &DVector<f64>, noise: &NoisePath) -> Result<()> {
    if z0.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "z0",
            expected: dim,
            found: z0.len(),
        });
    }
    if let Some(d) = noise.draws.iter().find(|d| d.gamma.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "noise.gamma",
            expected: dim,
            found: d.gamma.len(),
        });
    }
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState { t: 0 });
    }
    Ok(())
}

/// Applies `z_{t+1} = M z_t + gamma_t` literally.
pub fn simulate_recursive(m: &TransitionMatrix, z0: &DVector<f64>, noise: &NoisePath) -> Result<Trajectory> {
    check_dims(2 * m.n(), z0, noise)?;
    let mut z = Vec::with_capacity(noise.len() + 1);
    z.push(z0.clone());
    for (t, draw) in noise.draws.iter().enumerate() {
        let next = m.entries() * &z[t] + &draw.gamma;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t: t + 1 });
        }
        z.push(next);
    }
    Ok(Trajectory {
        z,
        noise: noise.clone(),
        method: Method::Recursive,
    })
}

/// Transformed states `Q^{-1} z_t` from the explicit solution. The initial
/// condition enters through scalar powers `lambda^{t}`; the shock sum is
/// accumulated as `S_{t+1} = J S_t + Q^{-1} gamma_t`.
pub fn explicit_transformed(
    dec: &SpectralDecomposition,
    z0: &DVector<f64>,
    noise: &NoisePath,
) -> Result<Vec<DVector<f64>>> {
    let (d, basis) = dec.diagonal_basis()?;
    check_dims(d.len(), z0, noise)?;
    let zt0 = &basis.q_inv * z0;
    let mut acc = DVector::zeros(d.len());
    let mut out = Vec::with_capacity(noise.len() + 1);
    out.push(zt0.clone());
    for (t, draw) in noise.draws.iter().enumerate() {
        let gt = &basis.q_inv * &draw.gamma;
        acc.component_mul_assign(&d);
        acc += gt;
        let p = (t + 1) as i32;
        let next = DVector::from_fn(d.len(), |k, _| d[k].powi(p) * zt0[k] + acc[k]);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t: t + 1 });
        }
        out.push(next);
    }
    Ok(out)
}

/// Trajectory from the explicit solution; requires the diagonalizable regime.
pub fn simulate_explicit(dec: &SpectralDecomposition, z0: &DVector<f64>, noise: &NoisePath) -> Result<Trajectory> {
    let transformed = explicit_transformed(dec, z0, noise)?;
    let (_, basis) = dec.diagonal_basis()?;
    let mut z = Vec::with_capacity(transformed.len());
    for (t, zt) in transformed.iter().enumerate() {
        let v = &basis.q * zt;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        z.push(v);
    }
    Ok(Trajectory {
        z,
        noise: noise.clone(),
        method: Method::Explicit,
    })
}

/// Largest `||z_a(t) - z_b(t)||_inf` over the common horizon.
pub fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.z.iter()
        .zip(&b.z)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

/// Weighted aggregates `xbar(t) = b . x_t`, `ybar(t) = a . y_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSeries {
    pub xbar: Vec<f64>,
    pub ybar: Vec<f64>,
}

pub fn aggregate_state(z: &DVector<f64>, params: &ModelParams) -> (f64, f64) {
    let n = params.n();
    let x: f64 = params.b().iter().zip(z.rows(0, n).iter()).map(|(w, v)| w * v).sum();
    let y: f64 = params.a().iter().zip(z.rows(n, n).iter()).map(|(w, v)| w * v).sum();
    (x, y)
}

pub fn aggregates(trajectory: &Trajectory, params: &ModelParams) -> Result<AggregateSeries> {
    let dim = params.dim();
    if let Some(z) = trajectory.z.iter().find(|z| z.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "trajectory state",
            expected: dim,
            found: z.len(),
        });
    }
    let (xbar, ybar) = trajectory.z.iter().map(|z| aggregate_state(z, params)).unzip();
    Ok(AggregateSeries { xbar, ybar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_transition_matrix, validate_params, RawParams};
    use crate::spectral::decompose;

    fn params(n: usize, alpha: f64, beta: f64) -> ModelParams {
        ModelParams::uniform(n, alpha, beta).unwrap()
    }

    #[test]
    fn degenerate_noise_equals_mean() {
        let p = params(2, 0.1, 0.9);
        let spec = NoiseSpec::degenerate(vec![1.0, 2.0, 3.0, 4.0]);
        let path = sample_noise_path(&spec, &p, 5, 1).unwrap();
        for d in &path.draws {
            assert_eq!(d.epsilon.as_slice(), &[1.0, 2.0]);
            assert_eq!(d.eta.as_slice(), &[3.0, 4.0]);
            assert_eq!(d.gamma.as_slice(), &[0.1, 0.2, -0.9 * 3.0, -0.9 * 4.0]);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let p = params(3, 0.1, 0.9);
        let spec = NoiseSpec::isotropic(3, 1.0);
        let a = sample_noise_path(&spec, &p, 50, 42).unwrap();
        let b = sample_noise_path(&spec, &p, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_noise_path(&spec, &p, 50, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn first_coordinate_sample_mean() {
        let p = params(1, 0.1, 0.9);
        let spec = NoiseSpec::isotropic(1, 1.0);
        let path = sample_noise_path(&spec, &p, 100_000, 7).unwrap();
        let mean = path.draws.iter().map(|d| d.epsilon[0]).sum::<f64>() / 1e5;
        // 3 sigma / sqrt(N)
        assert!(mean.abs() < 3.0 / 1e5f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn coordinates_use_their_own_law() {
        let p = params(2, 0.1, 0.9);
        let spec = NoiseSpec::new(vec![0.0, 5.0, -5.0, 10.0], vec![1.0, 0.1, 0.1, 2.0]);
        let path = sample_noise_path(&spec, &p, 20_000, 3).unwrap();
        let mean = |f: &dyn Fn(&NoiseDraw) -> f64| path.draws.iter().map(f).sum::<f64>() / 20_000.0;
        assert!((mean(&|d| d.epsilon[1]) - 5.0).abs() < 0.01);
        assert!((mean(&|d| d.eta[0]) + 5.0).abs() < 0.01);
        assert!((mean(&|d| d.eta[1]) - 10.0).abs() < 0.1);
    }

    #[test]
    fn zero_noise_zero_start_stays_zero() {
        let p = params(3, 0.1, 0.9);
        let m = build_transition_matrix(&p);
        let noise = sample_noise_path(&NoiseSpec::degenerate(vec![0.0; 6]), &p, 30, 0).unwrap();
        let tr = simulate_recursive(&m, &DVector::zeros(6), &noise).unwrap();
        assert!(tr.z.iter().all(|z| z.amax() == 0.0));
    }

    #[test]
    fn zero_noise_is_matrix_power() {
        let p = params(2, 0.3, 0.6);
        let m = build_transition_matrix(&p);
        let noise = sample_noise_path(&NoiseSpec::degenerate(vec![0.0; 4]), &p, 10, 0).unwrap();
        let z0 = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let tr = simulate_recursive(&m, &z0, &noise).unwrap();
        let mut want = z0.clone();
        for z in &tr.z {
            assert!((z - &want).amax() < 1e-14);
            want = m.entries() * want;
        }
    }

    #[test]
    fn recursive_residual_exact() {
        let p = params(3, 0.1, 0.9);
        let m = build_transition_matrix(&p);
        let noise = sample_noise_path(&NoiseSpec::isotropic(3, 1.0), &p, 200, 42).unwrap();
        let tr = simulate_recursive(&m, &DVector::zeros(6), &noise).unwrap();
        assert_eq!(tr.z.len(), 201);
        assert_eq!(tr.seed(), 42);
        for t in 0..200 {
            let r = &tr.z[t + 1] - m.entries() * &tr.z[t] - &noise.draws[t].gamma;
            assert!(r.amax() < 1e-14);
        }
        assert!(tr.max_abs() < 50.0);
    }

    #[test]
    fn explosive_parameters_fail_loudly() {
        let p = params(2, 3.5, 0.2);
        assert!(decompose(&p).eig.max_modulus() > 1.0);
        let m = build_transition_matrix(&p);
        let noise = sample_noise_path(&NoiseSpec::isotropic(2, 1.0), &p, 5000, 1).unwrap();
        let err = simulate_recursive(&m, &DVector::from_element(4, 1.0), &noise).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { t } if t > 10));
    }

    #[test]
    fn explicit_one_step_identity() {
        let p = params(3, 0.1, 0.9);
        let m = build_transition_matrix(&p);
        let dec = decompose(&p);
        let noise = sample_noise_path(&NoiseSpec::isotropic(3, 1.0), &p, 1, 5).unwrap();
        let z0 = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let tr = simulate_explicit(&dec, &z0, &noise).unwrap();
        let want = m.entries() * &z0 + &noise.draws[0].gamma;
        assert!((&tr.z[1] - want).amax() < 1e-12);
        assert_eq!(tr.method, Method::Explicit);
    }

    #[test]
    fn explicit_homogeneous() {
        let p = params(2, 0.1, 0.9);
        let m = build_transition_matrix(&p);
        let dec = decompose(&p);
        let noise = sample_noise_path(&NoiseSpec::degenerate(vec![0.0; 4]), &p, 40, 0).unwrap();
        let z0 = DVector::from_vec(vec![1.0, 0.0, -1.0, 2.0]);
        let tr = simulate_explicit(&dec, &z0, &noise).unwrap();
        let mut want = z0.clone();
        for z in &tr.z {
            assert!((z - &want).amax() < 1e-12);
            want = m.entries() * want;
        }
    }

    #[test]
    fn explicit_rejects_complex_regime() {
        let p = params(2, 1.09804, 0.7);
        let dec = decompose(&p);
        let noise = sample_noise_path(&NoiseSpec::isotropic(2, 1.0), &p, 3, 0).unwrap();
        let err = simulate_explicit(&dec, &DVector::zeros(4), &noise).unwrap_err();
        assert!(matches!(err, Error::WrongRegime { .. }));
    }

    #[test]
    fn aggregate_examples() {
        let p = validate_params(&RawParams {
            n: 2,
            alpha: 0.1,
            beta: 0.9,
            a: vec![0.5, 0.5],
            b: vec![0.6, 0.4],
        })
        .unwrap();
        let (x, _) = aggregate_state(&DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]), &p);
        assert!((x - 0.2).abs() < 1e-15);
        let (x, y) = aggregate_state(&DVector::from_vec(vec![2.5, 2.5, -1.0, -1.0]), &p);
        assert_eq!((x, y), (2.5, -1.0));
    }

    #[test]
    fn replication_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|r| replication_seed(42, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(replication_seed(42, 3), replication_seed(42, 3));
    }
}

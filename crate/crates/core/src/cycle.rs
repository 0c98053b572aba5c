//! Scalar cycle equation for the weighted aggregate
//! `xbar(t+2) + kappa1 xbar(t+1) + kappa2 xbar(t) = h(t)`.

use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::simulate::{rng_from_seed, NoisePath};
use crate::spectral::{classify_discriminant, discriminant, Regime, BOUNDARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleRegime {
    ComplexOscillatory,
    DistinctReal,
    RepeatedReal,
}

impl From<Regime> for CycleRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::ComplexConjugate => Self::ComplexOscillatory,
            Regime::DiagonalizableReal => Self::DistinctReal,
            Regime::RepeatedRootJordan => Self::RepeatedReal,
        }
    }
}

impl From<CycleRegime> for Regime {
    fn from(r: CycleRegime) -> Self {
        match r {
            CycleRegime::ComplexOscillatory => Self::ComplexConjugate,
            CycleRegime::DistinctReal => Self::DiagonalizableReal,
            CycleRegime::RepeatedReal => Self::RepeatedRootJordan,
        }
    }
}

/// Roots of `rho^2 + kappa1 rho + kappa2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleRoots {
    /// `rho1 >= rho2`
    Real { rho1: f64, rho2: f64 },
    Repeated { rho: f64 },
    /// `rho1 = re + i im`, `rho2` its conjugate, `im > 0`.
    Complex { re: f64, im: f64 },
}

impl CycleRoots {
    pub fn as_complex(&self) -> (Complex<f64>, Complex<f64>) {
        match *self {
            Self::Real { rho1, rho2 } => (Complex::new(rho1, 0.0), Complex::new(rho2, 0.0)),
            Self::Repeated { rho } => (Complex::new(rho, 0.0), Complex::new(rho, 0.0)),
            Self::Complex { re, im } => (Complex::new(re, im), Complex::new(re, -im)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleModel {
    pub alpha: f64,
    pub beta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub delta1: f64,
    pub roots: CycleRoots,
    /// Largest root modulus; `sqrt(kappa2)` in the oscillatory regime.
    pub rho_mod: f64,
    /// Angular frequency in `(0, pi)`; oscillatory regime only.
    pub omega: Option<f64>,
    pub regime: CycleRegime,
    /// `0 < kappa2 < 1`
    pub invertible: bool,
}

impl CycleModel {
    pub fn period(&self) -> Option<f64> {
        self.omega.map(|w| std::f64::consts::TAU / w)
    }

    fn require_oscillatory(&self) -> Result<(f64, f64)> {
        match self.omega {
            Some(w) if self.regime == CycleRegime::ComplexOscillatory => Ok((self.rho_mod, w)),
            _ => Err(Error::WrongRegime {
                expected: Regime::ComplexConjugate,
                found: self.regime.into(),
            }),
        }
    }

    /// One step of the recursion residual `x(t+2) + k1 x(t+1) + k2 x(t) - h`.
    pub fn residual(&self, x0: f64, x1: f64, x2: f64, h: f64) -> f64 {
        x2 + self.kappa1 * x1 + self.kappa2 * x0 - h
    }
}

pub fn reduce_to_cycle(alpha: f64, beta: f64) -> CycleModel {
    reduce_to_cycle_with_tol(alpha, beta, BOUNDARY_TOL)
}

pub fn reduce_to_cycle_with_tol(alpha: f64, beta: f64, boundary_tol: f64) -> CycleModel {
    let kappa1 = alpha + beta - 2.0;
    let kappa2 = 1.0 - alpha - beta + 2.0 * alpha * beta;
    let delta1 = kappa1 * kappa1 - 4.0 * kappa2;
    let scale = 1.0 + kappa1 * kappa1 + 4.0 * kappa2.abs() + alpha * alpha + beta * beta;
    debug_assert!((delta1 - discriminant(alpha, beta)).abs() <= 1e-12 * scale);
    // Same classification as the vector model: the two discriminants coincide.
    let (regime, _) = classify_discriminant(discriminant(alpha, beta), alpha, beta, boundary_tol);
    let regime = CycleRegime::from(regime);
    let half = -kappa1 / 2.0;
    let (roots, rho_mod, omega) = match regime {
        CycleRegime::ComplexOscillatory => {
            let im = delta1.abs().sqrt() / 2.0;
            let rho_mod = kappa2.max(0.0).sqrt();
            (CycleRoots::Complex { re: half, im }, rho_mod, Some(im.atan2(half)))
        }
        CycleRegime::RepeatedReal => (CycleRoots::Repeated { rho: half }, half.abs(), None),
        CycleRegime::DistinctReal => {
            let s = delta1.max(0.0).sqrt() / 2.0;
            let (rho1, rho2) = (half + s, half - s);
            (CycleRoots::Real { rho1, rho2 }, rho1.abs().max(rho2.abs()), None)
        }
    };
    CycleModel {
        alpha,
        beta,
        kappa1,
        kappa2,
        delta1,
        roots,
        rho_mod,
        omega,
        regime,
        invertible: kappa2 > 0.0 && kappa2 < 1.0,
    }
}

/// Interval form of `0 < kappa2 < 1`, split on the sign of `2 beta - 1`.
/// `None` at `beta = 1/2`, where the intervals are undefined.
pub fn interval_region(alpha: f64, beta: f64) -> Option<bool> {
    let d = 2.0 * beta - 1.0;
    if d == 0.0 {
        return None;
    }
    let (lo, hi) = if d > 0.0 {
        ((beta - 1.0) / d, beta / d)
    } else {
        (beta / d, (beta - 1.0) / d)
    };
    Some(lo < alpha && alpha < hi)
}

/// Aggregate shocks `eps_bar(t) = b . eps_t` and `eta_bar(t) = a . eta_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarNoise {
    pub eps_bar: Vec<f64>,
    pub eta_bar: Vec<f64>,
    /// `(mean, sd)` of `eps_bar`.
    pub eps_law: (f64, f64),
    pub eta_law: (f64, f64),
    pub seed: u64,
}

impl ScalarNoise {
    /// Independent Gaussian draws of length `t_max + 2`, interleaved
    /// `eps_bar(t), eta_bar(t)` per step.
    pub fn sample(t_max: usize, eps_law: (f64, f64), eta_law: (f64, f64), seed: u64) -> Result<Self> {
        for (name, (m, s)) in [("eps_law", eps_law), ("eta_law", eta_law)] {
            if !m.is_finite() || !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("need finite mean and sd >= 0, got ({m}, {s})"),
                });
            }
        }
        let mut rng = rng_from_seed(seed);
        let len = t_max + 2;
        let mut eps_bar = Vec::with_capacity(len);
        let mut eta_bar = Vec::with_capacity(len);
        for _ in 0..len {
            let e: f64 = rng.sample(StandardNormal);
            let h: f64 = rng.sample(StandardNormal);
            eps_bar.push(eps_law.0 + eps_law.1 * e);
            eta_bar.push(eta_law.0 + eta_law.1 * h);
        }
        Ok(Self {
            eps_bar,
            eta_bar,
            eps_law,
            eta_law,
            seed,
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            eps_bar: vec![0.0; len],
            eta_bar: vec![0.0; len],
            eps_law: (0.0, 0.0),
            eta_law: (0.0, 0.0),
            seed: 0,
        }
    }

    /// Aggregates the shocks of a vector-model noise path. The laws are
    /// not recoverable from a path and are left as NaN.
    pub fn from_vector_noise(path: &NoisePath, params: &ModelParams) -> Self {
        let dot = |w: &[f64], v: &nalgebra::DVector<f64>| w.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
        Self {
            eps_bar: path.draws.iter().map(|d| dot(params.b(), &d.epsilon)).collect(),
            eta_bar: path.draws.iter().map(|d| dot(params.a(), &d.eta)).collect(),
            eps_law: (f64::NAN, f64::NAN),
            eta_law: (f64::NAN, f64::NAN),
            seed: path.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.eps_bar.len().min(self.eta_bar.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `h(t) = alpha (eps_bar(t+1) - eps_bar(t)) + alpha beta (eps_bar(t) - eta_bar(t))`
pub fn forcing_term(noise: &ScalarNoise, alpha: f64, beta: f64, t: usize) -> Result<f64> {
    if t + 1 >= noise.eps_bar.len() {
        return Err(Error::IndexError {
            index: t + 1,
            len: noise.eps_bar.len(),
        });
    }
    if t >= noise.eta_bar.len() {
        return Err(Error::IndexError {
            index: t,
            len: noise.eta_bar.len(),
        });
    }
    let e0 = noise.eps_bar[t];
    let e1 = noise.eps_bar[t + 1];
    Ok(alpha * (e1 - e0) + alpha * beta * (e0 - noise.eta_bar[t]))
}

/// `h(0..count)`.
pub fn forcing_series(noise: &ScalarNoise, alpha: f64, beta: f64, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|t| forcing_term(noise, alpha, beta, t)).collect()
}

/// `xbar(0..=t_max)` by the literal recursion.
pub fn simulate_cycle(model: &CycleModel, noise: &ScalarNoise, x0: f64, x1: f64, t_max: usize) -> Result<Vec<f64>> {
    if t_max < 2 {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: format!("need T >= 2, got {t_max}"),
        });
    }
    let mut x = Vec::with_capacity(t_max + 1);
    x.push(x0);
    x.push(x1);
    for t in 0..t_max - 1 {
        let h = forcing_term(noise, model.alpha, model.beta, t)?;
        let next = -model.kappa1 * x[t + 1] - model.kappa2 * x[t] + h;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { t: t + 2 });
        }
        x.push(next);
    }
    Ok(x)
}

/// Constants `(c1, c2)` of `c1 |rho|^t cos(c2 + omega t)` through `x0`, `x1`,
/// with `c1 >= 0`.
pub fn fit_constants(model: &CycleModel, x0: f64, x1: f64) -> Result<(f64, f64)> {
    let (r, w) = model.require_oscillatory()?;
    if x0 == 0.0 && x1 == 0.0 {
        return Ok((0.0, 0.0));
    }
    // c1 cos c2 = x0, c1 sin c2 = (x0 cos w - x1 / r) / sin w
    let s = x0 * w.cos() - x1 / r;
    let c2 = s.atan2(x0 * w.sin());
    let c1 = (x0 * w.sin()).hypot(s) / w.sin();
    Ok((c1, c2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSolution {
    pub c1: f64,
    pub c2: f64,
    pub values: Vec<f64>,
}

/// `c1 |rho|^t cos(c2 + omega t)` for `t = 0..=t_max`.
pub fn homogeneous_solution(model: &CycleModel, c1: f64, c2: f64, t_max: usize) -> Result<CycleSolution> {
    let (r, w) = model.require_oscillatory()?;
    let values = (0..=t_max)
        .map(|t| {
            let t = t as f64;
            c1 * r.powf(t) * (c2 + w * t).cos()
        })
        .collect();
    Ok(CycleSolution { c1, c2, values })
}

/// Homogeneous solution in any regime, fitted to `x0`, `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum HomogeneousFit {
    /// `c1 |rho|^t cos(c2 + omega t)`
    Periodic { c1: f64, c2: f64 },
    /// `c1 rho1^t + c2 rho2^t`
    DistinctReal { c1: f64, c2: f64 },
    /// `(c0 + c1 t) rho^t`
    Repeated { c0: f64, c1: f64 },
}

pub fn fit_homogeneous(model: &CycleModel, x0: f64, x1: f64) -> Result<HomogeneousFit> {
    match model.roots {
        CycleRoots::Complex { .. } => {
            let (c1, c2) = fit_constants(model, x0, x1)?;
            Ok(HomogeneousFit::Periodic { c1, c2 })
        }
        CycleRoots::Real { rho1, rho2 } => {
            let c1 = (x1 - rho2 * x0) / (rho1 - rho2);
            Ok(HomogeneousFit::DistinctReal { c1, c2: x0 - c1 })
        }
        CycleRoots::Repeated { rho } => {
            if rho == 0.0 {
                if x1 != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "x1",
                        reason: "double root at zero forces x1 = 0".into(),
                    });
                }
                return Ok(HomogeneousFit::Repeated { c0: x0, c1: 0.0 });
            }
            Ok(HomogeneousFit::Repeated {
                c0: x0,
                c1: x1 / rho - x0,
            })
        }
    }
}

pub fn evaluate_homogeneous(model: &CycleModel, fit: &HomogeneousFit, t_max: usize) -> Vec<f64> {
    (0..=t_max)
        .map(|t| {
            let tf = t as f64;
            match (*fit, model.roots) {
                (HomogeneousFit::Periodic { c1, c2 }, _) => {
                    c1 * model.rho_mod.powf(tf) * (c2 + model.omega.unwrap_or(0.0) * tf).cos()
                }
                (HomogeneousFit::DistinctReal { c1, c2 }, CycleRoots::Real { rho1, rho2 }) => {
                    c1 * rho1.powi(t as i32) + c2 * rho2.powi(t as i32)
                }
                (HomogeneousFit::Repeated { c0, c1 }, CycleRoots::Repeated { rho }) => {
                    (c0 + c1 * tf) * rho.powi(t as i32)
                }
                _ => f64::NAN,
            }
        })
        .collect()
}

/// `psi_0 = 1`, `psi_1 = -kappa1`, `psi_s = -kappa1 psi_{s-1} - kappa2 psi_{s-2}`.
pub fn psi_weights(model: &CycleModel, count: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(count);
    for s in 0..count {
        let v = match s {
            0 => 1.0,
            1 => -model.kappa1,
            _ => -model.kappa1 * psi[s - 1] - model.kappa2 * psi[s - 2],
        };
        psi.push(v);
    }
    psi
}

/// Number of terms `K = ceil(ln tol / ln max|rho|)`.
pub fn truncation_order(model: &CycleModel, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "trunc_tol",
            reason: format!("{tol} not in (0, 1)"),
        });
    }
    if !model.invertible || model.rho_mod >= 1.0 {
        return Err(Error::NotInvertible {
            kappa2: model.kappa2,
            max_root_modulus: model.rho_mod,
        });
    }
    if model.rho_mod == 0.0 {
        return Ok(1);
    }
    Ok(((tol.ln() / model.rho_mod.ln()).ceil() as usize).max(1))
}

/// Causal particular solution `xp(t) = sum_{s=0}^{K} psi_s h(t-2-s)` for
/// `t = 0..h.len()+2`, so that `xp(t+2) + kappa1 xp(t+1) + kappa2 xp(t)`
/// reproduces `h(t)` up to the truncation error.
pub fn particular_solution(model: &CycleModel, h: &[f64], trunc_tol: f64) -> Result<Vec<f64>> {
    let k = truncation_order(model, trunc_tol)?;
    let psi = psi_weights(model, k + 1);
    let len = h.len() + 2;
    let mut out = vec![0.0; len];
    for (t, slot) in out.iter_mut().enumerate().skip(2) {
        let top = (t - 2).min(k);
        *slot = (0..=top).map(|s| psi[s] * h[t - 2 - s]).sum();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const FIG_A: (f64, f64) = (1.09804, 0.7);

    fn fig_a() -> CycleModel {
        reduce_to_cycle(FIG_A.0, FIG_A.1)
    }

    #[test]
    fn fig_a_coefficients() {
        let m = fig_a();
        assert_relative_eq!(m.kappa1, -0.20196, epsilon = 1e-12);
        assert_relative_eq!(m.kappa2, 0.739216, epsilon = 1e-12);
        assert_relative_eq!(m.delta1, -2.9160761584, epsilon = 1e-10);
        assert_relative_eq!(m.rho_mod, 0.8597767152, epsilon = 1e-9);
        assert_relative_eq!(m.omega.unwrap(), 1.4530755, epsilon = 1e-6);
        assert_relative_eq!(m.period().unwrap(), 4.32406, epsilon = 1e-5);
        assert!(m.invertible);
        assert_eq!(m.regime, CycleRegime::ComplexOscillatory);
        assert_relative_eq!(m.rho_mod * m.omega.unwrap().cos(), -m.kappa1 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.rho_mod * m.rho_mod, m.kappa2, epsilon = 1e-12);
    }

    #[test]
    fn equal_rates_oscillate() {
        for a in [0.1, 0.5, 1.3] {
            let m = reduce_to_cycle(a, a);
            assert_relative_eq!(m.delta1, -4.0 * a * a, epsilon = 1e-12);
            assert_eq!(m.regime, CycleRegime::ComplexOscillatory);
        }
    }

    #[test]
    fn half_beta_always_invertible() {
        for a in [-3.0, 0.2, 1.0, 7.5] {
            let m = reduce_to_cycle(a, 0.5);
            assert_relative_eq!(m.kappa2, 0.5, epsilon = 1e-12);
            assert!(m.invertible);
            assert_eq!(interval_region(a, 0.5), None);
        }
    }

    #[test]
    fn zero_kappa1_gives_quarter_turn() {
        let m = reduce_to_cycle(1.2, 0.8);
        assert_eq!(m.kappa1, 0.0);
        assert_eq!(m.omega.unwrap(), FRAC_PI_2);
    }

    #[test]
    fn real_regimes() {
        let m = reduce_to_cycle(0.1, 0.9);
        match m.roots {
            CycleRoots::Real { rho1, rho2 } => {
                assert!(rho1 > rho2);
                assert_relative_eq!(rho1 + rho2, -m.kappa1, epsilon = 1e-14);
                assert_relative_eq!(rho1 * rho2, m.kappa2, epsilon = 1e-14);
            }
            other => panic!("{other:?}"),
        }
        let beta = 0.6;
        let m = reduce_to_cycle((3.0 - 2.0 * 2f64.sqrt()) * beta, beta);
        assert_eq!(m.regime, CycleRegime::RepeatedReal);
        assert!(m.omega.is_none());
    }

    #[test]
    fn forcing_examples() {
        let zero = ScalarNoise::zeros(5);
        assert_eq!(forcing_term(&zero, 1.0, 0.5, 2).unwrap(), 0.0);
        let mut imp = ScalarNoise::zeros(3);
        imp.eps_bar[0] = 1.0;
        assert_eq!(forcing_term(&imp, 1.0, 0.5, 0).unwrap(), -0.5);
        assert_eq!(
            forcing_term(&imp, 1.0, 0.5, 2).unwrap_err(),
            Error::IndexError { index: 3, len: 3 }
        );
    }

    #[test]
    fn zero_noise_zero_start_stays_zero() {
        let x = simulate_cycle(&fig_a(), &ScalarNoise::zeros(102), 0.0, 0.0, 100).unwrap();
        assert_eq!(x.len(), 101);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_horizon_rejected() {
        assert!(simulate_cycle(&fig_a(), &ScalarNoise::zeros(10), 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn explosive_cycle_overflows() {
        let m = reduce_to_cycle(3.0, 3.0);
        assert!(!m.invertible);
        let err = simulate_cycle(&m, &ScalarNoise::zeros(5002), 1.0, 1.0, 5000).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn recursion_matches_closed_form() {
        let m = fig_a();
        let (x0, x1) = (0.7, -1.3);
        let x = simulate_cycle(&m, &ScalarNoise::zeros(102), x0, x1, 100).unwrap();
        let (c1, c2) = fit_constants(&m, x0, x1).unwrap();
        let sol = homogeneous_solution(&m, c1, c2, 100).unwrap();
        for (a, b) in x.iter().zip(&sol.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fourth_value() {
        let m = fig_a();
        let sol = homogeneous_solution(&m, 1.0, 0.0, 4).unwrap();
        // 0.8597767^4 cos(4 * 1.4530755)
        assert_relative_eq!(sol.values[4], 0.48697006843482, epsilon = 1e-12);
        let x1 = m.rho_mod * m.omega.unwrap().cos();
        let x = simulate_cycle(&m, &ScalarNoise::zeros(6), 1.0, x1, 4).unwrap();
        assert_relative_eq!(x[4], sol.values[4], epsilon = 1e-12);
    }

    #[test]
    fn fit_known_constants() {
        let m = fig_a();
        let (r, w) = (m.rho_mod, m.omega.unwrap());
        let (c1, c2) = fit_constants(&m, 1.0, r * w.cos()).unwrap();
        assert_relative_eq!(c1, 1.0, epsilon = 1e-12);
        assert!(c2.abs() < 1e-12);
        let (c1, c2) = fit_constants(&m, 0.0, -r * w.sin()).unwrap();
        assert_relative_eq!(c1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c2, FRAC_PI_2, epsilon = 1e-12);
        assert_eq!(fit_constants(&m, 0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn fit_requires_oscillation() {
        let m = reduce_to_cycle(0.1, 0.9);
        assert!(matches!(fit_constants(&m, 1.0, 0.0), Err(Error::WrongRegime { .. })));
        assert!(matches!(homogeneous_solution(&m, 1.0, 0.0, 3), Err(Error::WrongRegime { .. })));
    }

    #[test]
    fn zero_amplitude_and_start() {
        let m = fig_a();
        let sol = homogeneous_solution(&m, 0.0, 1.0, 20).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        let sol = homogeneous_solution(&m, 2.0, 0.3, 0).unwrap();
        assert_eq!(sol.values, vec![2.0 * 0.3f64.cos()]);
    }

    #[test]
    fn every_regime_fits_and_solves() {
        let beta = 0.6;
        for (a, b) in [(1.09804, 0.7), (0.1, 0.9), ((3.0 - 2.0 * 2f64.sqrt()) * beta, beta), (0.5, 0.05)] {
            let m = reduce_to_cycle(a, b);
            let fit = fit_homogeneous(&m, 0.4, -0.9).unwrap();
            let v = evaluate_homogeneous(&m, &fit, 60);
            assert!((v[0] - 0.4).abs() < 1e-12 && (v[1] + 0.9).abs() < 1e-12, "{fit:?}");
            let x = simulate_cycle(&m, &ScalarNoise::zeros(62), 0.4, -0.9, 60).unwrap();
            for (p, q) in v.iter().zip(&x) {
                assert!((p - q).abs() < 1e-9 * q.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn particular_zero_and_constant() {
        let m = fig_a();
        let xp = particular_solution(&m, &[0.0; 50], 1e-10).unwrap();
        assert!(xp.iter().all(|&v| v == 0.0));
        let h = vec![1.5; 400];
        let xp = particular_solution(&m, &h, 1e-12).unwrap();
        let steady = 1.5 / (2.0 * m.alpha * m.beta);
        assert_relative_eq!(1.0 + m.kappa1 + m.kappa2, 2.0 * m.alpha * m.beta, epsilon = 1e-14);
        assert!((xp[401] - steady).abs() < 1e-9);
    }

    #[test]
    fn particular_solves_forced_equation() {
        let m = fig_a();
        let noise = ScalarNoise::sample(500, (0.0, 1.0), (0.0, 1.6), 3).unwrap();
        let h = forcing_series(&noise, m.alpha, m.beta, 500).unwrap();
        let k = truncation_order(&m, 1e-10).unwrap();
        let xp = particular_solution(&m, &h, 1e-10).unwrap();
        for t in k..h.len() {
            assert!(m.residual(xp[t], xp[t + 1], xp[t + 2], h[t]).abs() < 1e-8);
        }
    }

    #[test]
    fn particular_requires_invertibility() {
        let m = reduce_to_cycle(3.0, 3.0);
        assert!(matches!(
            particular_solution(&m, &[1.0], 1e-10),
            Err(Error::NotInvertible { .. })
        ));
        // kappa2 inside (0, 1) but a real root outside the unit circle
        // roots 1.5 and 0.4
        let r = 0.61f64.sqrt();
        let m = reduce_to_cycle((0.1 + r) / 2.0, (0.1 - r) / 2.0);
        assert!(m.invertible && m.rho_mod > 1.0);
        assert!(particular_solution(&m, &[1.0], 1e-10).is_err());
    }

    #[test]
    fn interval_region_grid() {
        let mut checked = 0;
        for i in 0..=120 {
            for j in 0..=120 {
                let a = -3.0 + 6.0 * i as f64 / 120.0;
                let b = -3.0 + 6.0 * j as f64 / 120.0 + 1e-3;
                if let Some(inside) = interval_region(a, b) {
                    assert_eq!(inside, reduce_to_cycle(a, b).invertible, "{a} {b}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 14000);
    }

    #[test]
    fn psi_matches_roots() {
        for (a, b) in [FIG_A, (0.3, 0.4), (0.1, 0.9), (0.9, 0.1)] {
            let m = reduce_to_cycle(a, b);
            let psi = psi_weights(&m, 201);
            let (r1, r2) = m.roots.as_complex();
            for (s, p) in psi.iter().enumerate() {
                let sum: Complex<f64> = (0..=s).map(|j| r1.powu(j as u32) * r2.powu((s - j) as u32)).sum();
                assert!((sum.re - p).abs() < 1e-10 && sum.im.abs() < 1e-10);
            }
        }
        let _ = PI;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn coefficient_identities(alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
            let m = reduce_to_cycle(alpha, beta);
            prop_assert!((m.delta1 - discriminant(alpha, beta)).abs() < 1e-12 * (1.0 + alpha * alpha + beta * beta));
            prop_assert!((1.0 + m.kappa1 + m.kappa2 - 2.0 * alpha * beta).abs() < 1e-12 * (1.0 + (alpha * beta).abs()));
            let (_, spectral) = crate::spectral::classify_regime(alpha, beta, BOUNDARY_TOL);
            prop_assert_eq!(Regime::from(m.regime), spectral);
        }
    }

    proptest! {
        #[test]
        fn fit_reproduces_initial_values(x0 in -10.0f64..10.0, x1 in -10.0f64..10.0) {
            let m = fig_a();
            let (c1, c2) = fit_constants(&m, x0, x1).unwrap();
            prop_assert!(c1 >= 0.0);
            let sol = homogeneous_solution(&m, c1, c2, 50).unwrap();
            prop_assert!((sol.values[0] - x0).abs() < 1e-12 * x0.abs().max(1.0));
            prop_assert!((sol.values[1] - x1).abs() < 1e-12 * x1.abs().max(1.0));
            for w in sol.values.windows(3) {
                prop_assert!(m.residual(w[0], w[1], w[2], 0.0).abs() < 1e-9 * w[2].abs().max(1.0));
            }
        }
    }
}

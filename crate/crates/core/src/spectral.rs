//! Spectral regime, Jordan form and explicit eigenbasis of the transition
//! matrix.
//!
//! The characteristic polynomial factors as
//! `(l - 1 + beta)^(n-1) (l - 1 + alpha)^(n-1) g(l)` with
//! `g(l) = (l - 1)^2 + (l - 1)(alpha + beta) + 2 alpha beta`, whose
//! discriminant is `delta = alpha^2 + beta^2 - 6 alpha beta`. The sign of
//! `delta` splits parameter space into three regimes separated by the lines
//! `alpha = (3 -+ 2 sqrt 2) beta`.
//!
//! In the diagonalizable regime the basis `Q` and its inverse are assembled
//! in closed form in `O(n^2)`; no dense factorization is involved.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_transition_matrix, ModelParams};

/// Relative tolerance on the discriminant for the repeated-root regime.
pub const BOUNDARY_TOL: f64 = 1e-10;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `delta < 0`: `g` has a complex-conjugate root pair.
    ComplexConjugate,
    /// `delta > 0`: four distinct real eigenvalues, `M` diagonalizable.
    DiagonalizableReal,
    /// `delta = 0` within tolerance: one `2 x 2` Jordan block.
    RepeatedRootJordan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeBoundaries {
    pub d1: f64,
    pub d2: f64,
    pub delta: f64,
    /// Absolute threshold on `|delta|` used for the repeated-root test.
    pub threshold: f64,
}

pub fn discriminant(alpha: f64, beta: f64) -> f64 {
    alpha * alpha + beta * beta - 6.0 * alpha * beta
}

/// Classifies a discriminant value. `|delta| <= tol * max(1, alpha^2 + beta^2)`
/// counts as zero.
pub fn classify_discriminant(delta: f64, alpha: f64, beta: f64, boundary_tol: f64) -> (Regime, f64) {
    let threshold = boundary_tol * (alpha * alpha + beta * beta).max(1.0);
    let regime = if delta.abs() <= threshold {
        Regime::RepeatedRootJordan
    } else if delta < 0.0 {
        Regime::ComplexConjugate
    } else {
        Regime::DiagonalizableReal
    };
    (regime, threshold)
}

pub fn classify_regime(alpha: f64, beta: f64, boundary_tol: f64) -> (RegimeBoundaries, Regime) {
    let delta = discriminant(alpha, beta);
    let (regime, threshold) = classify_discriminant(delta, alpha, beta, boundary_tol);
    let boundaries = RegimeBoundaries {
        d1: (3.0 - 2.0 * SQRT2) * beta,
        d2: (3.0 + 2.0 * SQRT2) * beta,
        delta,
        threshold,
    };
    (boundaries, regime)
}

/// `det(lambda I - M)` through its closed-form factorization.
pub fn characteristic_polynomial(params: &ModelParams, lambda: f64) -> f64 {
    let (alpha, beta) = (params.alpha(), params.beta());
    let k = (params.n() - 1) as i32;
    let u = lambda - 1.0;
    let g = u * u + u * (alpha + beta) + 2.0 * alpha * beta;
    (lambda - 1.0 + beta).powi(k) * (lambda - 1.0 + alpha).powi(k) * g
}

/// The two eigenvalues contributed by the quadratic factor `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadraticRoots {
    Real { lambda3: f64, lambda4: f64 },
    Repeated { lambda3: f64 },
    /// `lambda3 = re + i im`, `lambda4 = re - i im`, `im > 0`.
    Complex { re: f64, im: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenStructure {
    pub n: usize,
    /// `1 - alpha`, multiplicity `n - 1`.
    pub lambda1: f64,
    /// `1 - beta`, multiplicity `n - 1`.
    pub lambda2: f64,
    pub lambda34: QuadraticRoots,
}

impl EigenStructure {
    /// Distinct eigenvalue entries with algebraic multiplicities, in the
    /// order `lambda1, lambda3, lambda2, lambda4`.
    pub fn with_multiplicity(&self) -> Vec<(Complex<f64>, usize)> {
        let m = self.n - 1;
        let real = |x: f64| Complex::new(x, 0.0);
        let mut out = vec![(real(self.lambda1), m)];
        match self.lambda34 {
            QuadraticRoots::Real { lambda3, lambda4 } => {
                out.push((real(lambda3), 1));
                out.push((real(self.lambda2), m));
                out.push((real(lambda4), 1));
            }
            QuadraticRoots::Repeated { lambda3 } => {
                out.push((real(self.lambda2), m));
                out.push((real(lambda3), 2));
            }
            QuadraticRoots::Complex { re, im } => {
                out.push((Complex::new(re, im), 1));
                out.push((real(self.lambda2), m));
                out.push((Complex::new(re, -im), 1));
            }
        }
        out.retain(|(_, k)| *k > 0);
        out
    }

    /// All `2n` eigenvalues, repeated by multiplicity.
    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        self.with_multiplicity()
            .into_iter()
            .flat_map(|(l, k)| std::iter::repeat_n(l, k))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.spectrum().iter().map(|l| l.re).sum()
    }

    pub fn determinant(&self) -> f64 {
        self.spectrum().iter().fold(Complex::new(1.0, 0.0), |acc, l| acc * l).re
    }

    pub fn max_modulus(&self) -> f64 {
        let pair = match self.lambda34 {
            QuadraticRoots::Real { lambda3, lambda4 } => lambda3.abs().max(lambda4.abs()),
            QuadraticRoots::Repeated { lambda3 } => lambda3.abs(),
            QuadraticRoots::Complex { re, im } => re.hypot(im),
        };
        let mut m = pair;
        if self.n > 1 {
            m = m.max(self.lambda1.abs()).max(self.lambda2.abs());
        }
        m
    }

    /// `(lambda1, lambda2, lambda3, lambda4)` when all are real.
    pub fn real_quadruple(&self) -> Option<[f64; 4]> {
        match self.lambda34 {
            QuadraticRoots::Real { lambda3, lambda4 } => {
                Some([self.lambda1, self.lambda2, lambda3, lambda4])
            }
            QuadraticRoots::Repeated { lambda3 } => Some([self.lambda1, self.lambda2, lambda3, lambda3]),
            QuadraticRoots::Complex { .. } => None,
        }
    }
}

pub fn eigen_structure(params: &ModelParams, boundaries: &RegimeBoundaries, regime: Regime) -> EigenStructure {
    let (alpha, beta) = (params.alpha(), params.beta());
    let centre = 1.0 - 0.5 * (alpha + beta);
    let half_root = 0.5 * boundaries.delta.abs().sqrt();
    let lambda34 = match regime {
        Regime::DiagonalizableReal => QuadraticRoots::Real {
            lambda3: centre + half_root,
            lambda4: centre - half_root,
        },
        Regime::RepeatedRootJordan => QuadraticRoots::Repeated { lambda3: centre },
        Regime::ComplexConjugate => QuadraticRoots::Complex {
            re: centre,
            im: half_root,
        },
    };
    EigenStructure {
        n: params.n(),
        lambda1: 1.0 - alpha,
        lambda2: 1.0 - beta,
        lambda34,
    }
}

/// A run of `count` identical Jordan blocks of size `block_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JordanSegment {
    pub eigenvalue: f64,
    pub block_size: usize,
    pub count: usize,
}

/// Block description of `J`; never stored densely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanForm {
    pub segments: Vec<JordanSegment>,
}

impl JordanForm {
    fn from_eigen(eig: &EigenStructure) -> Option<Self> {
        let m = eig.n - 1;
        let seg = |eigenvalue, block_size, count| JordanSegment {
            eigenvalue,
            block_size,
            count,
        };
        let mut segments = match eig.lambda34 {
            QuadraticRoots::Real { lambda3, lambda4 } => vec![
                seg(eig.lambda1, 1, m),
                seg(lambda3, 1, 1),
                seg(eig.lambda2, 1, m),
                seg(lambda4, 1, 1),
            ],
            QuadraticRoots::Repeated { lambda3 } => vec![
                seg(eig.lambda1, 1, m),
                seg(eig.lambda2, 1, m),
                seg(lambda3, 2, 1),
            ],
            QuadraticRoots::Complex { .. } => return None,
        };
        segments.retain(|s| s.count > 0);
        Some(Self { segments })
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.block_size * s.count).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.segments.iter().all(|s| s.block_size == 1)
    }

    /// Diagonal entries, when every block is `1 x 1`.
    pub fn diagonal(&self) -> Option<DVector<f64>> {
        if !self.is_diagonal() {
            return None;
        }
        let d: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.eigenvalue, s.count))
            .collect();
        Some(DVector::from_vec(d))
    }

    /// Dense `J^t`, built blockwise from scalar powers.
    pub fn power(&self, t: u32) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        let mut at = 0;
        for s in &self.segments {
            for _ in 0..s.count {
                let l = s.eigenvalue;
                let lt = l.powi(t as i32);
                for k in 0..s.block_size {
                    out[(at + k, at + k)] = lt;
                }
                if s.block_size == 2 {
                    out[(at, at + 1)] = if t == 0 { 0.0 } else { t as f64 * l.powi(t as i32 - 1) };
                }
                at += s.block_size;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.power(1)
    }
}

/// Scalars entering the explicit basis.
///
/// `tau_minus = 2 / (beta - alpha - sqrt delta)` and
/// `tau_plus = 2 / (beta - alpha + sqrt delta)`; `tau_tilde = alpha (tau_minus - tau_plus)`.
/// The eigenvector for `lambda3` is `(1_n, loading3 1_n)` with
/// `loading3 = -1 / (alpha tau_minus)`, likewise `loading4 = -1 / (alpha tau_plus)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisScales {
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub tau_tilde: f64,
    pub loading3: f64,
    pub loading4: f64,
    /// `loading4 - loading3 = -sqrt(delta) / alpha`; pivot of the lower diagonal block of the inverse.
    pub column_scale: f64,
}

pub fn basis_scales(params: &ModelParams, boundaries: &RegimeBoundaries, regime: Regime) -> Result<BasisScales> {
    if regime != Regime::DiagonalizableReal {
        return Err(Error::WrongRegime {
            expected: Regime::DiagonalizableReal,
            found: regime,
        });
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    if alpha == 0.0 || beta == 0.0 {
        return Err(Error::DegenerateScale(format!(
            "alpha * beta = 0 (alpha = {alpha}, beta = {beta}) leaves tau undefined"
        )));
    }
    let root = boundaries.delta.sqrt();
    let s = beta - alpha;
    // (s - root)(s + root) = 4 alpha beta; take the non-cancelling one first.
    let (minus, plus) = if s >= 0.0 {
        let plus = s + root;
        (4.0 * alpha * beta / plus, plus)
    } else {
        let minus = s - root;
        (minus, 4.0 * alpha * beta / minus)
    };
    let tau_minus = 2.0 / minus;
    let tau_plus = 2.0 / plus;
    let tau_tilde = alpha * (tau_minus - tau_plus);
    let loading3 = -minus / (2.0 * alpha);
    let loading4 = -plus / (2.0 * alpha);
    let column_scale = -root / alpha;
    let finite = [tau_minus, tau_plus, tau_tilde, loading3, loading4, column_scale]
        .iter()
        .all(|v| v.is_finite());
    if !finite || tau_tilde == 0.0 || column_scale == 0.0 {
        return Err(Error::DegenerateScale(format!(
            "tau_minus = {tau_minus}, tau_plus = {tau_plus}, tau_tilde = {tau_tilde}"
        )));
    }
    Ok(BasisScales {
        tau_minus,
        tau_plus,
        tau_tilde,
        loading3,
        loading4,
        column_scale,
    })
}

fn require_two_agents(params: &ModelParams) -> Result<usize> {
    match params.n() {
        n if n >= 2 => Ok(n),
        n => Err(Error::TooFewAgents { n, required: 2 }),
    }
}

/// Eigenbasis `Q` with columns ordered as the diagonal of `J`:
/// `n - 1` vectors for `lambda1`, one for `lambda3`, `n - 1` for `lambda2`,
/// one for `lambda4`.
pub fn build_basis(params: &ModelParams, scales: &BasisScales) -> Result<DMatrix<f64>> {
    let n = require_two_agents(params)?;
    let (a, b) = (params.a(), params.b());
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n - 1 {
        // kernel of M - lambda1: x with b.x = 0, y = 0
        q[(0, i)] = -b[i + 1] / b[0];
        q[(i + 1, i)] = 1.0;
        // kernel of M - lambda2: x = 0, y with a.y = 0
        q[(n, n + i)] = -a[i + 1] / a[0];
        q[(n + i + 1, n + i)] = 1.0;
    }
    for r in 0..n {
        q[(r, n - 1)] = 1.0;
        q[(n + r, n - 1)] = scales.loading3;
        q[(r, 2 * n - 1)] = 1.0;
        q[(n + r, 2 * n - 1)] = scales.loading4;
    }
    Ok(q)
}

/// Closed-form `Q^{-1}`.
///
/// Two column operations reduce `Q` to `diag(Q21, Q22)`: column `2n` minus
/// column `n`, then column `n` plus `k` times column `2n` with
/// `k = -loading3 / column_scale`. Both diagonal blocks have explicit
/// inverses, and the same two elementary operations applied as row
/// operations in reverse yield `Q^{-1}`.
pub fn build_basis_inverse(params: &ModelParams, scales: &BasisScales) -> Result<DMatrix<f64>> {
    let n = require_two_agents(params)?;
    let s = scales.column_scale;
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateScale(format!("column scale {s}")));
    }
    let (a, b) = (params.a(), params.b());
    let mut x = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n - 1 {
        x[(r, 0)] = -b[0];
        x[(n + r, n)] = -a[0];
        for c in 1..n {
            let id = if c - 1 == r { 1.0 } else { 0.0 };
            x[(r, c)] = id - b[c];
            x[(n + r, n + c)] = id - a[c];
        }
    }
    for c in 0..n {
        x[(n - 1, c)] = b[c];
        x[(2 * n - 1, n + c)] = a[c] / s;
    }
    let k = -scales.loading3 / s;
    let (pivot, last) = (n - 1, 2 * n - 1);
    for c in 0..2 * n {
        let v = x[(last, c)] + k * x[(pivot, c)];
        x[(last, c)] = v;
    }
    for c in 0..2 * n {
        let v = x[(pivot, c)] - x[(last, c)];
        x[(pivot, c)] = v;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub q: DMatrix<f64>,
    pub q_inv: DMatrix<f64>,
}

/// Everything known about the spectrum of `M` for a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub regime: Regime,
    pub boundaries: RegimeBoundaries,
    pub eig: EigenStructure,
    /// `None` in the complex-conjugate regime (no real Jordan form of this shape).
    pub jordan: Option<JordanForm>,
    pub scales: Option<BasisScales>,
    pub basis: Option<EigenBasis>,
    /// Why `basis` is absent, when it is.
    pub basis_note: Option<String>,
}

impl SpectralDecomposition {
    /// Diagonal of `J` together with the basis; fails outside the
    /// diagonalizable regime or when the basis is degenerate.
    pub fn diagonal_basis(&self) -> Result<(DVector<f64>, &EigenBasis)> {
        if self.regime != Regime::DiagonalizableReal {
            return Err(Error::WrongRegime {
                expected: Regime::DiagonalizableReal,
                found: self.regime,
            });
        }
        let basis = self.basis.as_ref().ok_or_else(|| {
            Error::DegenerateScale(self.basis_note.clone().unwrap_or_else(|| "no basis".into()))
        })?;
        let d = self
            .jordan
            .as_ref()
            .and_then(JordanForm::diagonal)
            .expect("diagonalizable regime has a diagonal Jordan form");
        Ok((d, basis))
    }
}

pub fn decompose(params: &ModelParams) -> SpectralDecomposition {
    decompose_with_tol(params, BOUNDARY_TOL)
}

pub fn decompose_with_tol(params: &ModelParams, boundary_tol: f64) -> SpectralDecomposition {
    let (boundaries, regime) = classify_regime(params.alpha(), params.beta(), boundary_tol);
    let eig = eigen_structure(params, &boundaries, regime);
    let jordan = JordanForm::from_eigen(&eig);
    let (scales, basis, basis_note) = match basis_scales(params, &boundaries, regime) {
        Err(e) => (None, None, Some(e.to_string())),
        Ok(sc) => {
            let built = build_basis(params, &sc).and_then(|q| Ok((q, build_basis_inverse(params, &sc)?)));
            match built {
                Ok((q, q_inv)) => (Some(sc), Some(EigenBasis { q, q_inv }), None),
                Err(e) => (Some(sc), None, Some(e.to_string())),
            }
        }
    };
    SpectralDecomposition {
        regime,
        boundaries,
        eig,
        jordan,
        scales,
        basis,
        basis_note,
    }
}

/// Max-norm residuals of a decomposition `M = Q J Q^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mq_minus_qj: f64,
    pub q_qinv_minus_identity: f64,
    pub qinv_m_q_minus_j: f64,
    pub m_max_norm: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Measures the residuals. The `MQ - QJ` and `Q^{-1} M Q - J` residuals are
/// judged relative to `max(1, ||M||_max)`, the identity residual absolutely.
pub fn verify_decomposition(
    m: &DMatrix<f64>,
    jordan: &JordanForm,
    q: &DMatrix<f64>,
    q_inv: &DMatrix<f64>,
    tol: f64,
) -> Result<VerificationReport> {
    let dim = m.nrows();
    if dim < 4 {
        return Err(Error::TooFewAgents {
            n: dim / 2,
            required: 2,
        });
    }
    for (what, found) in [
        ("jordan", jordan.dim()),
        ("q", q.nrows()),
        ("q_inv", q_inv.nrows()),
    ] {
        if found != dim {
            return Err(Error::DimensionMismatch {
                what,
                expected: dim,
                found,
            });
        }
    }
    let j = jordan.to_dense();
    let max_abs = |x: DMatrix<f64>| x.abs().max();
    let mq_minus_qj = max_abs(m * q - q * &j);
    let q_qinv_minus_identity = max_abs(q * q_inv - DMatrix::identity(dim, dim));
    let qinv_m_q_minus_j = max_abs(q_inv * m * q - &j);
    let m_max_norm = m.abs().max();
    let scale = m_max_norm.max(1.0);
    let passed = mq_minus_qj < tol * scale
        && q_qinv_minus_identity < tol
        && qinv_m_q_minus_j < tol * scale;
    Ok(VerificationReport {
        mq_minus_qj,
        q_qinv_minus_identity,
        qinv_m_q_minus_j,
        m_max_norm,
        tol,
        passed,
    })
}

/// Runs [`verify_decomposition`] on a decomposition built by [`decompose`].
pub fn verify(params: &ModelParams, dec: &SpectralDecomposition, tol: f64) -> Result<VerificationReport> {
    let (_, basis) = dec.diagonal_basis()?;
    let m = build_transition_matrix(params);
    let jordan = dec.jordan.as_ref().expect("diagonal regime");
    verify_decomposition(m.entries(), jordan, &basis.q, &basis.q_inv, tol)
}

//! Model parameters, noise law and the transition matrix.
//!
//! The state `z_t = (x_t, y_t)` stacks the output growth rates `x` and the
//! sentiment growth rates `y` of `n` agents and evolves as
//! `z_{t+1} = M z_t + gamma_t` with
//!
//! ```text
//!     M = | (1-alpha) I_n     alpha 1 a   |
//!         |  -beta 1 b       (1-beta) I_n |
//! ```
//!
//! where every row of the top-right block is `alpha * a` and every row of the
//! bottom-left block is `-beta * b`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum(w) - 1|` for simplex membership.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Unvalidated parameter record, as read from a configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Validated model parameters. Only obtainable through [`validate_params`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    n: usize,
    alpha: f64,
    beta: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ModelParams {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Sentiment weights.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Output weights.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// State dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            n: self.n,
            alpha: self.alpha,
            beta: self.beta,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    /// Convenience constructor with uniform weights `1/n`.
    pub fn uniform(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        let w = vec![1.0 / n.max(1) as f64; n];
        validate_params(&RawParams {
            n,
            alpha,
            beta,
            a: w.clone(),
            b: w,
        })
    }
}

/// Validates a raw record and returns the accepted parameters.
///
/// Weight vectors whose sums are within [`WEIGHT_SUM_TOL`] of one are
/// renormalized; anything further away is rejected.
pub fn validate_params(raw: &RawParams) -> Result<ModelParams> {
    if raw.n == 0 {
        return Err(Error::TooFewAgents { n: 0, required: 1 });
    }
    if !raw.alpha.is_finite() || !raw.beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha/beta",
            reason: "must be finite".into(),
        });
    }
    if (raw.alpha == 0.0 && raw.beta == 0.0) || (raw.alpha == 1.0 && raw.beta == 1.0) {
        return Err(Error::ForbiddenPair {
            alpha: raw.alpha,
            beta: raw.beta,
        });
    }
    for (what, w) in [("a", &raw.a), ("b", &raw.b)] {
        if w.len() != raw.n {
            return Err(Error::DimensionMismatch {
                what,
                expected: raw.n,
                found: w.len(),
            });
        }
    }
    let a = simplex_member("a", &raw.a)?;
    let b = simplex_member("b", &raw.b)?;
    Ok(ModelParams {
        n: raw.n,
        alpha: raw.alpha,
        beta: raw.beta,
        a,
        b,
    })
}

fn simplex_member(vector: &'static str, w: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::WeightViolation {
            vector,
            reason: format!("entry {i} = {v} is not strictly positive"),
        });
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightViolation {
            vector,
            reason: format!("entries sum to {sum}, not 1"),
        });
    }
    Ok(renormalize(w, sum))
}

/// Rescales to unit sum and pushes the rounding residue into the largest
/// entry, so that a vector which already sums to exactly 1.0 is a fixed point.
fn renormalize(w: &[f64], sum: f64) -> Vec<f64> {
    if (sum - 1.0).abs() <= 1e-14 {
        return w.to_vec();
    }
    let mut out: Vec<f64> = w.iter().map(|v| v / sum).collect();
    let imax = out
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for _ in 0..8 {
        let s: f64 = out.iter().sum();
        if s == 1.0 {
            break;
        }
        out[imax] += 1.0 - s;
    }
    out
}

/// Non-fatal warnings about economically unusual parameter values.
pub fn lint_params(params: &ModelParams) -> Vec<String> {
    let mut warnings = Vec::new();
    for (name, v) in [("alpha", params.alpha), ("beta", params.beta)] {
        if !(0.0..=1.0).contains(&v) {
            warnings.push(format!("{name} = {v} lies outside [0, 1]"));
        }
    }
    warnings
}

/// Gaussian law of the agent shocks `(epsilon_1..epsilon_n, eta_1..eta_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Draw every shock equal to its mean (zero-variance limit).
    #[serde(default)]
    pub zero_noise: bool,
}

impl NoiseSpec {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Self {
        Self {
            mu,
            sigma,
            zero_noise: false,
        }
    }

    /// Centered shocks with common standard deviation.
    pub fn isotropic(n: usize, sd: f64) -> Self {
        Self::new(vec![0.0; 2 * n], vec![sd; 2 * n])
    }

    /// Deterministic shocks fixed at `mu`.
    pub fn degenerate(mu: Vec<f64>) -> Self {
        let sigma = vec![1.0; mu.len()];
        Self {
            mu,
            sigma,
            zero_noise: true,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let dim = params.dim();
        for (what, v) in [("noise.mu", &self.mu), ("noise.sigma", &self.sigma)] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        if let Some(m) = self.mu.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise.mu",
                reason: format!("{m} is not finite"),
            });
        }
        if let Some(s) = self.sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "noise.sigma",
                reason: format!("{s} is not strictly positive"),
            });
        }
        Ok(())
    }

    /// Effective standard deviation of coordinate `i` (zero when degenerate).
    pub fn effective_sigma(&self, i: usize) -> f64 {
        if self.zero_noise {
            0.0
        } else {
            self.sigma[i]
        }
    }
}

/// The `2n x 2n` transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// Checks the block structure exactly (no tolerance).
    pub fn satisfies_block_invariants(&self, params: &ModelParams) -> bool {
        let n = self.n;
        let (alpha, beta) = (params.alpha, params.beta);
        let m = &self.entries;
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                if m[(i, j)] != (1.0 - alpha) * id
                    || m[(n + i, n + j)] != (1.0 - beta) * id
                    || m[(i, n + j)] != alpha * params.a[j]
                    || m[(n + i, j)] != -beta * params.b[j]
                {
                    return false;
                }
            }
        }
        true
    }
}

pub fn build_transition_matrix(params: &ModelParams) -> TransitionMatrix {
    let n = params.n;
    let (alpha, beta) = (params.alpha, params.beta);
    let entries = DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) if i == j => 1.0 - alpha,
        (false, false) if i == j => 1.0 - beta,
        (true, false) => alpha * params.a[j - n],
        (false, true) => -beta * params.b[j],
        _ => 0.0,
    });
    TransitionMatrix { n, entries }
}

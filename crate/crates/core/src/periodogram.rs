//! Dominant frequency of a series from its raw periodogram.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_LEN: usize = 64;
/// Peaks below this multiple of the smoothed median are not reported as stable.
pub const PROMINENCE_THRESHOLD: f64 = 3.0;
const SMOOTH_HALF_WIDTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodEstimate {
    /// Cycles per step, in `(0, 0.5]`.
    pub frequency: f64,
    pub period: f64,
    pub peak_bin: usize,
    /// Max over median of the smoothed periodogram.
    pub prominence: f64,
    pub stable: bool,
}

/// `|DFT(x - mean)|^2 / N` at bins `1..=N/2`; entry `k-1` is frequency `k/N`.
pub fn periodogram(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

pub fn dominant_period(series: &[f64]) -> Result<PeriodEstimate> {
    let n = series.len();
    if n < MIN_LEN {
        return Err(Error::TooShort { len: n, min: MIN_LEN });
    }
    if let Some(t) = series.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    let p = periodogram(series);
    let (i, &peak) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty periodogram");
    let mut delta = 0.0;
    if i > 0 && i + 1 < p.len() {
        let denom = p[i - 1] - 2.0 * peak + p[i + 1];
        if denom < 0.0 {
            delta = (0.5 * (p[i - 1] - p[i + 1]) / denom).clamp(-0.5, 0.5);
        }
    }
    let bin = (i + 1) as f64 + delta;
    let frequency = (bin / n as f64).min(0.5);

    let half = SMOOTH_HALF_WIDTH.min(p.len() / 8);
    let mut smooth: Vec<f64> = (0..p.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(p.len() - 1);
            p[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let top = smooth.iter().copied().fold(0.0, f64::max);
    let med = median(&mut smooth);
    let prominence = if med > 0.0 {
        top / med
    } else if top > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(PeriodEstimate {
        frequency,
        period: 1.0 / frequency,
        peak_bin: i + 1,
        prominence,
        stable: prominence >= PROMINENCE_THRESHOLD,
    })
}

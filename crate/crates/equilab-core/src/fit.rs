//! Decay-rate fitting: envelope extraction by windowed maxima, least-squares
//! slopes on log-log or semi-log axes, and a periodogram for oscillation
//! frequencies.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Noise floor below which magnitudes carry no slope information.
pub const MAG_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScale {
    /// log |value| against log t (power laws t^slope).
    LogLog,
    /// log |value| against t (exponential laws e^{slope * t}).
    SemiLog,
}

/// Fit metadata recorded alongside the slope.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitWindow {
    pub n_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub envelope_window: usize,
    pub scale: FitScale,
    /// l1 norm of the observable's Fourier coefficients, when relevant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell1_norm: Option<f64>,
    /// max over the grid of |disc| * t^{s/2} / ||f^||_1, when relevant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_constant: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub window: FitWindow,
}

/// Sliding-window maximum: envelope of an oscillating magnitude series.
pub fn envelope(mags: &[f64], window: usize) -> Vec<f64> {
    let n = mags.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            mags[lo..hi].iter().cloned().fold(f64::MIN, f64::max)
        })
        .collect()
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let r = yi - (intercept + slope * xi);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

/// Envelope fit of a magnitude series over a grid of times.
///
/// Errors with `DegenerateFit` when every magnitude sits below the floor.
pub fn envelope_fit(
    ts: &[f64],
    mags: &[f64],
    window: usize,
    scale: FitScale,
) -> Result<AsymptoticFit> {
    if ts.len() != mags.len() || ts.len() < 4 {
        return Err(CoreError::InvalidInput(format!(
            "need matching grids with >= 4 points, got {} / {}",
            ts.len(),
            mags.len()
        )));
    }
    let env = envelope(mags, window);
    if env.iter().all(|&m| m < MAG_FLOOR) {
        return Err(CoreError::DegenerateFit(
            "all magnitudes below 1e-13".to_string(),
        ));
    }
    // drop the clamped half-windows at both ends: on a uniform grid the
    // interior envelope of a monotone series is an exact lag of the series,
    // so the regression slope is unbiased
    let half = window / 2;
    let (lo, hi) = if ts.len() >= 2 * half + 4 {
        (half, ts.len() - half)
    } else {
        (0, ts.len())
    };
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for (t, e) in ts.iter().zip(&env).take(hi).skip(lo) {
        if *e < MAG_FLOOR {
            continue;
        }
        xs.push(match scale {
            FitScale::LogLog => t.ln(),
            FitScale::SemiLog => *t,
        });
        ys.push(e.ln());
    }
    if xs.len() < 4 {
        return Err(CoreError::DegenerateFit(
            "fewer than 4 usable envelope points".to_string(),
        ));
    }
    let (slope, intercept, rms) = least_squares(&xs, &ys);
    Ok(AsymptoticFit {
        slope,
        intercept,
        residual_rms: rms,
        window: FitWindow {
            n_points: ts.len(),
            t_min: ts[0],
            t_max: ts[ts.len() - 1],
            envelope_window: window,
            scale,
            ell1_norm: None,
            empirical_constant: None,
        },
    })
}

/// Dominant oscillation frequency of a series by a dense periodogram scan
/// (plain DFT against a frequency grid; the series need not be uniform).
pub fn dominant_frequency(ts: &[f64], values: &[f64], f_min: f64, f_max: f64) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut best = (0.0, f_min);
    let steps = 2000;
    for i in 0..=steps {
        let f = f_min + (f_max - f_min) * i as f64 / steps as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, v) in ts.iter().zip(values) {
            let ph = f * t;
            re += (v - mean) * ph.cos();
            im += (v - mean) * ph.sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, f);
        }
    }
    best.1
}

/// Log-spaced grid with `n` points covering [a, b].
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Linear grid with `n` points covering [a, b].
pub fn lin_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

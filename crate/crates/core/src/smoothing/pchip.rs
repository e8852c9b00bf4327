//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes).

use super::piecewise::{Cubic, PiecewisePolynomial};
use super::FitError;

/// Knot slopes for a monotone cubic Hermite interpolant.
///
/// Interior slopes are zero where the neighbouring secants differ in sign or
/// either vanishes, and otherwise the weighted harmonic mean
/// `(w1 + w2) / (w1 / s_{k-1} + w2 / s_k)` with `w1 = 2 h_k + h_{k-1}` and
/// `w2 = h_k + 2 h_{k-1}`. End slopes come from the one-sided three-point
/// formula, zeroed when it opposes the first secant and capped at three
/// times that secant when the data turns.
pub fn pchip_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let secant: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();

    if n == 2 {
        return vec![secant[0]; 2];
    }

    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (s0, s1) = (secant[k - 1], secant[k]);
        if s0 == 0.0 || s1 == 0.0 || s0.signum() != s1.signum() {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / s0 + w2 / s1);
        }
    }
    m[0] = end_slope(h[0], h[1], secant[0], secant[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() || s0 == 0.0 {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

/// Hermite cubic on each interval from knot values and slopes.
pub fn hermite(t: &[f64], y: &[f64], m: &[f64]) -> PiecewisePolynomial {
    let coeffs: Vec<Cubic> = (0..t.len() - 1)
        .map(|k| {
            let h = t[k + 1] - t[k];
            let delta = (y[k + 1] - y[k]) / h;
            [
                y[k],
                m[k],
                (3.0 * delta - 2.0 * m[k] - m[k + 1]) / h,
                (m[k] + m[k + 1] - 2.0 * delta) / (h * h),
            ]
        })
        .collect();
    PiecewisePolynomial::new(t.to_vec(), coeffs)
}

/// Monotone interpolant through non-decreasing data.
pub fn pchip(t: &[f64], y: &[f64]) -> Result<PiecewisePolynomial, FitError> {
    if t.len() != y.len() {
        return Err(FitError::Input(format!(
            "{} times but {} values",
            t.len(),
            y.len()
        )));
    }
    if t.len() < 2 {
        return Err(FitError::TooFewPoints {
            n: t.len(),
            needed: 2,
        });
    }
    if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(FitError::Input(format!(
            "times not strictly increasing at index {}",
            i + 1
        )));
    }
    if let Some(i) = y.windows(2).position(|w| w[1] < w[0]) {
        return Err(FitError::Decreasing(i + 1));
    }
    Ok(hermite(t, y, &pchip_slopes(t, y)))
}

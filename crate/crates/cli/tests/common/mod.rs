//! Test fixtures shared by the acceptance runner.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use trajectory_core::TimeDistanceSeries;

/// A plausible stop-and-go series: cadence 1..=15 s, runs of motion at
/// varying speed broken by stops, with an occasional sharp jump so local
/// regressions overshoot. Distances never decrease.
pub fn random_series(rng: &mut ChaCha8Rng, n: usize) -> TimeDistanceSeries {
    let cadence = rand::distr::weighted::WeightedIndex::new([
        4, 8, 12, 14, 14, 12, 10, 8, 6, 4, 3, 2, 1, 1, 1,
    ])
    .unwrap();
    let mut t = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let (mut tk, mut dk) = (0.0, 0.0);
    let mut moving = true;
    let mut speed: f64 = rng.random_range(2.0..12.0);
    for _ in 0..n {
        t.push(tk);
        d.push(dk);
        let dt = (cadence.sample(rng) + 1) as f64;
        tk += dt;
        if rng.random_bool(0.12) {
            moving = !moving;
            speed = rng.random_range(2.0..12.0);
        }
        if moving {
            let jitter: f64 = rng.random_range(0.0..1.0);
            dk += speed * dt * (0.5 + jitter);
            if rng.random_bool(0.03) {
                dk += rng.random_range(50.0..250.0);
            }
        } else if rng.random_bool(0.2) {
            dk += rng.random_range(0.0..3.0);
        }
    }
    TimeDistanceSeries::new(t, d, 1_650_873_600).unwrap()
}

/// Series with strictly distinct knots and gentle noise, for the oracle
/// comparison.
pub fn oracle_series(rng: &mut ChaCha8Rng, n: usize) -> TimeDistanceSeries {
    let mut t = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let (mut tk, mut dk) = (0.0, 0.0);
    for _ in 0..n {
        t.push(tk);
        d.push(dk);
        tk += rng.random_range(1.0..12.0f64).round().max(1.0);
        dk += rng.random_range(0.0..60.0);
    }
    TimeDistanceSeries::new(t, d, 0).unwrap()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Brute-force local regression estimate at knot `i`: sort every knot by
/// distance (earlier index first on ties), keep `k`, take the bandwidth from
/// the next strictly farther knot, weight by tricube and solve the normal
/// equations in units of the bandwidth.
pub fn oracle_locreg_at(t: &[f64], d: &[f64], i: usize, k: usize, degree: usize) -> f64 {
    let q = t[i];
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| {
        (t[a] - q)
            .abs()
            .total_cmp(&(t[b] - q).abs())
            .then(a.cmp(&b))
    });
    let k = k.min(t.len());
    let chosen = &order[..k];
    let farthest = (t[order[k - 1]] - q).abs();
    let h = order[k..]
        .iter()
        .map(|&j| (t[j] - q).abs())
        .find(|&dist| dist > farthest)
        .unwrap_or(farthest * (k as f64 + 1.0) / k as f64);

    let p = degree + 1;
    let mut ata = vec![vec![0.0; p]; p];
    let mut atb = vec![0.0; p];
    for &j in chosen {
        let u = (t[j] - q) / h;
        let w = (1.0 - u.abs().powi(3)).max(0.0).powi(3);
        for r in 0..p {
            atb[r] += w * u.powi(r as i32) * d[j];
            for c in 0..p {
                ata[r][c] += w * u.powi((r + c) as i32);
            }
        }
    }
    gauss_solve(ata, atb).expect("full-rank neighbourhood")[0]
}

/// Root-mean-square of `a - b`.
pub fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).powi(2), n + 1));
    (sum / n as f64).sqrt()
}

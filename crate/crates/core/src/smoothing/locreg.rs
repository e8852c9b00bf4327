//! Local polynomial regression with a nearest-neighbour bandwidth.
//!
//! For a query time `q` the `k` knots nearest in time are selected (ties go
//! to the earlier knot). The bandwidth `h` is the distance to the next knot
//! strictly farther than the k-th neighbour, so every selected knot gets a
//! positive kernel weight. A weighted least-squares polynomial in the scaled
//! variable `u = (t - q) / h` is then fitted; its constant, linear and
//! quadratic coefficients give position, speed and acceleration at `q`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(1 - |u|³)³`
    Tricube,
    /// `1 - u²`
    Epanechnikov,
    Uniform,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        let u = u.abs();
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Tricube => {
                let v = 1.0 - u * u * u;
                v * v * v
            }
            Kernel::Epanechnikov => 1.0 - u * u,
            Kernel::Uniform => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocregConfig {
    pub degree: usize,
    pub bandwidth_points: usize,
    pub kernel: Kernel,
}

impl Default for LocregConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            bandwidth_points: 20,
            kernel: Kernel::Tricube,
        }
    }
}

impl LocregConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.degree > 3 {
            return Err(FitError::Config(format!(
                "degree {} exceeds 3",
                self.degree
            )));
        }
        if self.bandwidth_points <= self.degree {
            return Err(FitError::Config(format!(
                "bandwidth of {} points cannot support degree {}",
                self.bandwidth_points, self.degree
            )));
        }
        Ok(())
    }
}

/// Local polynomial fitted around one query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub x: f64,
    pub v: f64,
    pub a: f64,
    /// Degree actually used after any rank-deficiency fallback.
    pub degree: usize,
}

/// Neighbour window `[lo, hi)` and bandwidth for a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbourhood {
    pub lo: usize,
    pub hi: usize,
    pub bandwidth: f64,
}

/// The k nearest knots to `q` (contiguous, since `t` is sorted) and the
/// bandwidth.
pub fn neighbourhood(t: &[f64], q: f64, k: usize) -> Neighbourhood {
    let n = t.len();
    let k = k.min(n);
    let start = t.partition_point(|&x| x < q);
    let (mut lo, mut hi) = (start, start);
    while hi - lo < k {
        let dl = if lo > 0 { q - t[lo - 1] } else { f64::INFINITY };
        let dr = if hi < n { t[hi] - q } else { f64::INFINITY };
        if dl <= dr {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let farthest = (q - t[lo]).max(t[hi - 1] - q);

    let mut bandwidth = f64::INFINITY;
    if let Some(d) = t[..lo].iter().rev().map(|&x| q - x).find(|&d| d > farthest) {
        bandwidth = bandwidth.min(d);
    }
    if let Some(d) = t[hi..].iter().map(|&x| x - q).find(|&d| d > farthest) {
        bandwidth = bandwidth.min(d);
    }
    if !bandwidth.is_finite() {
        // Every knot is already selected: widen slightly past the farthest.
        bandwidth = farthest * (k as f64 + 1.0) / k as f64;
    }
    if !(bandwidth > 0.0) {
        bandwidth = 1.0;
    }
    Neighbourhood { lo, hi, bandwidth }
}

/// Weighted least-squares fit of degree `config.degree` around `q`,
/// lowering the degree while the weighted design is rank-deficient.
pub fn fit_at(t: &[f64], d: &[f64], q: f64, config: &LocregConfig) -> LocalFit {
    let nb = neighbourhood(t, q, config.bandwidth_points);
    let h = nb.bandwidth;
    let rows: Vec<(f64, f64, f64)> = (nb.lo..nb.hi)
        .map(|j| {
            let u = (t[j] - q) / h;
            (u, config.kernel.weight(u).sqrt(), d[j])
        })
        .filter(|&(_, sw, _)| sw > 0.0)
        .collect();

    for degree in (1..=config.degree).rev() {
        if let Some(beta) = solve(&rows, degree) {
            let coef = |m: usize| beta.get(m).copied().unwrap_or(0.0);
            return LocalFit {
                x: coef(0),
                v: coef(1) / h,
                a: 2.0 * coef(2) / (h * h),
                degree,
            };
        }
    }
    // Weighted mean when even a line is undetermined.
    let (num, den) = rows.iter().fold((0.0, 0.0), |(n, w), &(_, sw, y)| {
        (n + sw * sw * y, w + sw * sw)
    });
    LocalFit {
        x: if den > 0.0 { num / den } else { d[nb.lo] },
        v: 0.0,
        a: 0.0,
        degree: 0,
    }
}

fn solve(rows: &[(f64, f64, f64)], degree: usize) -> Option<Vec<f64>> {
    let p = degree + 1;
    if rows.len() < p {
        return None;
    }
    let a = DMatrix::from_fn(rows.len(), p, |r, c| {
        let (u, sw, _) = rows[r];
        sw * u.powi(c as i32)
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&(_, sw, y)| sw * y));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return None;
    }
    svd.solve(&b, 0.0).ok().map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tricube_shape() {
        assert_eq!(Kernel::Tricube.weight(0.0), 1.0);
        assert_eq!(Kernel::Tricube.weight(1.0), 0.0);
        assert_eq!(Kernel::Tricube.weight(-1.5), 0.0);
        assert!((Kernel::Tricube.weight(0.5) - (0.875f64).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn neighbourhood_picks_nearest_and_next_distance() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let nb = neighbourhood(&t, 4.2, 3);
        assert_eq!((nb.lo, nb.hi), (3, 6));
        // Selected distances 0.2, 0.8, 1.2; the next knot out is t = 6 at 1.8.
        assert!((nb.bandwidth - 1.8).abs() < 1e-12);
    }

    #[test]
    fn neighbourhood_tie_prefers_earlier_and_skips_tied_bandwidth() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        // Query on a knot with k = 2: itself, then t = 3 (tie with 5, earlier wins).
        let nb = neighbourhood(&t, 4.0, 2);
        assert_eq!((nb.lo, nb.hi), (3, 5));
        // t = 5 is at the same distance as t = 3, so it cannot be the
        // bandwidth; the next strictly farther knot is at distance 2.
        assert_eq!(nb.bandwidth, 2.0);
    }

    #[test]
    fn neighbourhood_all_points() {
        let t = [0.0, 1.0, 3.0];
        let nb = neighbourhood(&t, 0.0, 20);
        assert_eq!((nb.lo, nb.hi), (0, 3));
        assert!((nb.bandwidth - 3.0 * 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_times_degrade_degree() {
        let t = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let d = [0.0, 0.0, 0.0, 2.0, 2.0, 2.0];
        let cfg = LocregConfig {
            bandwidth_points: 6,
            ..LocregConfig::default()
        };
        let fit = fit_at(&t, &d, 0.5, &cfg);
        assert_eq!(fit.degree, 1);
        assert!((fit.x - 1.0).abs() < 1e-12);
        assert!((fit.v - 2.0).abs() < 1e-12);
    }
}

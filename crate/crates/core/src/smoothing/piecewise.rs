//! Piecewise polynomials of degree at most 3 in local coordinates.

/// Coefficients `[c0, c1, c2, c3]` of `c0 + c1 s + c2 s² + c3 s³` where `s`
/// is the time since the start of the piece.
pub type Cubic = [f64; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    breaks: Vec<f64>,
    coeffs: Vec<Cubic>,
}

fn eval_cubic(c: &Cubic, s: f64, order: usize) -> f64 {
    match order {
        0 => c[0] + s * (c[1] + s * (c[2] + s * c[3])),
        1 => c[1] + s * (2.0 * c[2] + s * 3.0 * c[3]),
        2 => 2.0 * c[2] + 6.0 * c[3] * s,
        3 => 6.0 * c[3],
        _ => 0.0,
    }
}

impl PiecewisePolynomial {
    /// `breaks` holds `coeffs.len() + 1` strictly increasing values.
    pub fn new(breaks: Vec<f64>, coeffs: Vec<Cubic>) -> Self {
        assert_eq!(breaks.len(), coeffs.len() + 1, "one more break than pieces");
        assert!(!coeffs.is_empty(), "at least one piece");
        debug_assert!(breaks.windows(2).all(|w| w[1] > w[0]));
        Self { breaks, coeffs }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn coeffs(&self) -> &[Cubic] {
        &self.coeffs
    }

    pub fn num_pieces(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the piece containing `t`. Breakpoints belong to the piece on
    /// their right, except the final one.
    pub fn locate(&self, t: f64) -> usize {
        let idx = self.breaks.partition_point(|&b| b <= t);
        idx.saturating_sub(1).min(self.coeffs.len() - 1)
    }

    /// Value (`order` 0) or derivative of the active piece at `t`.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let k = self.locate(t);
        eval_cubic(&self.coeffs[k], t - self.breaks[k], order)
    }

    /// Derivative of piece `k` at its right end.
    pub fn left_derivative_at_end(&self, k: usize, order: usize) -> f64 {
        eval_cubic(&self.coeffs[k], self.breaks[k + 1] - self.breaks[k], order)
    }

    /// Derivative of piece `k` at its left end.
    pub fn right_derivative_at_start(&self, k: usize, order: usize) -> f64 {
        eval_cubic(&self.coeffs[k], 0.0, order)
    }

    /// Effective degree of piece `k`: the highest power whose contribution
    /// over the piece width is not negligible next to the piece's scale.
    pub fn piece_degree(&self, k: usize) -> usize {
        let c = &self.coeffs[k];
        let h = self.breaks[k + 1] - self.breaks[k];
        let terms = [
            c[0].abs(),
            (c[1] * h).abs(),
            (c[2] * h * h).abs(),
            (c[3] * h * h * h).abs(),
        ];
        let scale = terms.iter().cloned().fold(0.0, f64::max).max(1e-300);
        (1..4)
            .rev()
            .find(|&m| terms[m] > 1e-12 * scale)
            .unwrap_or(0)
    }
}

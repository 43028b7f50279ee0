//! Piecewise monotone cubic Hermite interpolation with an inverse.

use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};

/// Monotone increasing cubic Hermite interpolant.
///
/// Slopes are either supplied (exact derivative data) or estimated with the
/// three-point weighted harmonic mean; in both cases the Fritsch–Carlson
/// limiter `α² + β² ≤ 9` is applied so each piece is monotone and the
/// inverse is well defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_data(&xs, &ys)?;
        let slopes = harmonic_mean_slopes(&xs, &ys);
        Ok(Self::limited(xs, ys, slopes))
    }

    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        check_data(&xs, &ys)?;
        if slopes.len() != xs.len() || slopes.iter().any(|s| !s.is_finite()) {
            return Err(EbkError::InvalidInput("slopes do not match the data".into()));
        }
        Ok(Self::limited(xs, ys, slopes))
    }

    fn limited(xs: Vec<f64>, ys: Vec<f64>, mut m: Vec<f64>) -> Self {
        for i in 0..xs.len() - 1 {
            let delta = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            let (a, b) = (m[i] / delta, m[i + 1] / delta);
            if a < 0.0 {
                m[i] = 0.0;
            }
            if b < 0.0 {
                m[i + 1] = 0.0;
            }
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let t = 3.0 / r2.sqrt();
                m[i] = t * a * delta;
                m[i + 1] = t * b * delta;
            }
        }
        Self { xs, ys, slopes: m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    fn interval(&self, x: f64) -> usize {
        self.xs
            .partition_point(|&v| v <= x)
            .clamp(1, self.xs.len() - 1)
            - 1
    }

    fn piece(&self, i: usize, x: f64) -> (f64, f64) {
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (y0, y1, m0, m1) = (self.ys[i], self.ys[i + 1], self.slopes[i], self.slopes[i + 1]);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        let slope = (6.0 * t2 - 6.0 * t) / h * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) / h * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (value, slope)
    }

    /// Value at `x`, `None` outside the knot range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        (lo..=hi).contains(&x).then(|| self.piece(self.interval(x), x).0)
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        (lo..=hi).contains(&x).then(|| self.piece(self.interval(x), x).1)
    }

    /// The `x` with `p(x) = y`: Newton on the bracketing piece, falling back
    /// to bisection whenever a step leaves the bracket.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&y) {
            return None;
        }
        let i = (self.ys.partition_point(|&v| v <= y).clamp(1, self.ys.len() - 1)) - 1;
        let (mut a, mut b) = (self.xs[i], self.xs[i + 1]);
        let mut x = a + (b - a) * (y - self.ys[i]) / (self.ys[i + 1] - self.ys[i]);
        for _ in 0..200 {
            let (v, s) = self.piece(i, x);
            let r = v - y;
            if r.abs() <= 1e-15 * y.abs().max(1.0) {
                return Some(x);
            }
            if r < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = if s > 0.0 { x - r / s } else { f64::NAN };
            x = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                return Some(x);
            }
        }
        Some(x)
    }
}

fn check_data(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(EbkError::InvalidInput("need at least two matching knots".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EbkError::InvalidInput("non-finite knot data".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EbkError::InvalidInput("abscissae must be strictly increasing".into()));
    }
    if ys.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EbkError::NotDiffeomorphism {
            detail: "ordinates are not strictly increasing".into(),
        });
    }
    Ok(())
}

fn harmonic_mean_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        let w1 = 2.0 * h[i] + h[i - 1];
        let w2 = h[i] + 2.0 * h[i - 1];
        m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

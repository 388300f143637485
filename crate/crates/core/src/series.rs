//! Sampled one-dimensional data: piecewise-cubic interpolation and
//! finite-difference weights on arbitrary nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights `w` such that `sum_i w[i] f(nodes[i])` approximates
/// `f^(order)(at)`; exact for polynomials of degree `< nodes.len()`.
///
/// Fornberg's recursion, numerically stable for arbitrary spacing.
pub fn fd_weights(nodes: &[f64], at: f64, order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more than {order} nodes");
    // c[i][k]: weight of node i for derivative k
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - at;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - at;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Strictly increasing `(abscissa, value)` samples with piecewise-cubic
/// interpolation through the four samples surrounding each query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSeries {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl CubicSeries {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidSamples(format!(
                "piecewise-cubic interpolation needs at least 4 samples, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidSamples("non-finite sample".into()));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidSamples(
                "sample abscissae must be strictly increasing".into(),
            ));
        }
        Ok(CubicSeries {
            xs: points.iter().map(|p| p[0]).collect(),
            ys: points.iter().map(|p| p[1]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.xs[0]
    }

    pub fn last(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Index of the first of four consecutive samples used around `x`.
    fn window(&self, x: f64) -> usize {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&xi| xi <= x).saturating_sub(1);
        i.saturating_sub(1).min(n - 4)
    }

    fn check(&self, x: f64) -> Result<()> {
        if x < self.first() || x > self.last() {
            return Err(Error::OutOfDomain {
                value: x,
                lo: self.first(),
                hi: self.last(),
            });
        }
        Ok(())
    }

    /// Derivative of the local cubic interpolant at `x`.
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        self.check(x)?;
        if order > 3 {
            return Ok(0.0);
        }
        let s = self.window(x);
        let w = fd_weights(&self.xs[s..s + 4], x, order);
        Ok(w.iter().zip(&self.ys[s..s + 4]).map(|(a, b)| a * b).sum())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.derivative(x, 0)
    }

    /// One-sided difference of `order` at the first sample, using the
    /// first `order + 3` samples (second-order accurate).
    pub fn leading_derivative(&self, order: usize) -> Result<f64> {
        let n = (order + 3).min(self.len());
        if n <= order {
            return Err(Error::InvalidSamples(format!(
                "derivative of order {order} needs at least {} samples",
                order + 1
            )));
        }
        let w = fd_weights(&self.xs[..n], self.xs[0], order);
        Ok(w.iter().zip(&self.ys[..n]).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_weights_reproduce_textbook_stencils() {
        let w = fd_weights(&[-1.0, 0.0, 1.0], 0.0, 1);
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
        let w = fd_weights(&[0.0, 1.0, 2.0, 3.0], 0.0, 2);
        for (a, b) in w.iter().zip([2.0, -5.0, 4.0, -1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_series_is_exact_on_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let pts: Vec<[f64; 2]> = (0..9).map(|i| 0.3 * i as f64).map(|x| [x, f(x)]).collect();
        let s = CubicSeries::new(&pts).unwrap();
        for &x in &[0.0, 0.1, 0.77, 1.5, 2.4] {
            assert!((s.eval(x).unwrap() - f(x)).abs() < 1e-12);
            assert!((s.derivative(x, 1).unwrap() - (-2.0 + 1.5 * x * x)).abs() < 1e-11);
        }
        assert!(s.eval(2.5).is_err());
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(CubicSeries::new(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).is_err());
        assert!(CubicSeries::new(&[[0.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).is_err());
    }
}

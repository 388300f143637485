//! Exact polynomial algebra on the edges of the star graph.
//!
//! Everything lives in the monomial basis `c_0 + c_1 x + ... + c_d x^d`.
//! Endpoint values at `x = 0` and `x = l_j` are what the compatibility
//! and lifting code consume, and low degrees dominate, so no orthogonal
//! basis is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE_CAP: usize = 32;

/// Free functions on raw coefficient slices, shared by edge polynomials
/// and polynomial time signals.
pub mod mono {
    pub fn trim(coeffs: &mut Vec<f64>) {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
    }

    pub fn degree(coeffs: &[f64]) -> usize {
        coeffs.len().saturating_sub(1)
    }

    pub fn horner(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Coefficients of the `order`-th derivative.
    pub fn derivative(coeffs: &[f64], order: usize) -> Vec<f64> {
        if order >= coeffs.len() {
            return Vec::new();
        }
        let mut out: Vec<f64> = coeffs[order..]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * falling_factorial(i + order, order))
            .collect();
        trim(&mut out);
        out
    }

    /// `d^order/dx^order` of the polynomial evaluated at `x`.
    pub fn derivative_at(coeffs: &[f64], order: usize, x: f64) -> f64 {
        horner(&derivative(coeffs, order), x)
    }

    pub fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            for (k, &bk) in b.iter().enumerate() {
                out[i + k] += ai * bk;
            }
        }
        trim(&mut out);
        out
    }

    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len().max(b.len());
        let mut out: Vec<f64> = (0..n)
            .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
            .collect();
        trim(&mut out);
        out
    }

    pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
        let mut out: Vec<f64> = a.iter().map(|c| c * s).collect();
        trim(&mut out);
        out
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(a: &[f64]) -> Vec<f64> {
        if a.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(a.len() + 1);
        out.push(0.0);
        out.extend(a.iter().enumerate().map(|(i, c)| c / (i + 1) as f64));
        trim(&mut out);
        out
    }

    /// `n (n-1) ... (n-k+1)`.
    pub fn falling_factorial(n: usize, k: usize) -> f64 {
        (0..k).map(|i| (n - i) as f64).product()
    }
}

/// A polynomial on edge `edge`, defined on `[0, l_edge]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePoly {
    edge: usize,
    coeffs: Vec<f64>,
    #[serde(default = "default_cap", skip_serializing)]
    cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DEGREE_CAP
}

impl EdgePoly {
    pub fn new(edge: usize, coeffs: Vec<f64>) -> Result<Self> {
        Self::with_cap(edge, coeffs, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(edge: usize, mut coeffs: Vec<f64>, cap: usize) -> Result<Self> {
        mono::trim(&mut coeffs);
        let degree = mono::degree(&coeffs);
        if degree > cap {
            return Err(Error::DegreeCapExceeded { degree, cap });
        }
        Ok(EdgePoly { edge, coeffs, cap })
    }

    pub fn zero(edge: usize) -> Self {
        EdgePoly {
            edge,
            coeffs: Vec::new(),
            cap: DEFAULT_DEGREE_CAP,
        }
    }

    pub fn constant(edge: usize, c: f64) -> Self {
        let mut coeffs = vec![c];
        mono::trim(&mut coeffs);
        EdgePoly {
            edge,
            coeffs,
            cap: DEFAULT_DEGREE_CAP,
        }
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn degree(&self) -> usize {
        mono::degree(&self.coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Horner evaluation without a domain check.
    pub fn eval(&self, x: f64) -> f64 {
        mono::horner(&self.coeffs, x)
    }

    /// Evaluation restricted to the edge `[0, length]`.
    pub fn eval_on(&self, x: f64, length: f64) -> Result<f64> {
        if !(0.0..=length).contains(&x) {
            return Err(Error::OutOfDomain {
                value: x,
                lo: 0.0,
                hi: length,
            });
        }
        Ok(self.eval(x))
    }

    pub fn derivative(&self, order: usize) -> EdgePoly {
        EdgePoly {
            edge: self.edge,
            coeffs: mono::derivative(&self.coeffs, order),
            cap: self.cap,
        }
    }

    pub fn derivative_at(&self, order: usize, x: f64) -> f64 {
        mono::derivative_at(&self.coeffs, order, x)
    }

    fn same_edge(&self, other: &EdgePoly) -> Result<()> {
        if self.edge != other.edge {
            return Err(Error::EdgeMismatch {
                left: self.edge,
                right: other.edge,
            });
        }
        Ok(())
    }

    pub fn product(&self, other: &EdgePoly) -> Result<EdgePoly> {
        self.same_edge(other)?;
        let cap = self.cap.min(other.cap);
        EdgePoly::with_cap(self.edge, mono::product(&self.coeffs, &other.coeffs), cap)
    }

    pub fn add(&self, other: &EdgePoly) -> Result<EdgePoly> {
        self.same_edge(other)?;
        Ok(EdgePoly {
            edge: self.edge,
            coeffs: mono::add(&self.coeffs, &other.coeffs),
            cap: self.cap.min(other.cap),
        })
    }

    pub fn sub(&self, other: &EdgePoly) -> Result<EdgePoly> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> EdgePoly {
        EdgePoly {
            edge: self.edge,
            coeffs: mono::scale(&self.coeffs, s),
            cap: self.cap,
        }
    }

    pub fn antiderivative(&self) -> Result<EdgePoly> {
        EdgePoly::with_cap(self.edge, mono::antiderivative(&self.coeffs), self.cap)
    }

    /// Exact integral over `[0, length]`.
    pub fn integral(&self, length: f64) -> f64 {
        mono::horner(&mono::antiderivative(&self.coeffs), length)
    }
}

/// One polynomial per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPoly {
    pub edges: Vec<EdgePoly>,
}

impl GraphPoly {
    pub fn new(edges: Vec<EdgePoly>) -> Self {
        GraphPoly { edges }
    }

    pub fn zero(n_edges: usize) -> Self {
        GraphPoly {
            edges: (0..n_edges).map(EdgePoly::zero).collect(),
        }
    }

    pub fn from_coeffs(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let edges = coeffs
            .into_iter()
            .enumerate()
            .map(|(j, c)| EdgePoly::new(j, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphPoly { edges })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, j: usize) -> &EdgePoly {
        &self.edges[j]
    }

    pub fn map(&self, f: impl Fn(&EdgePoly) -> EdgePoly) -> GraphPoly {
        GraphPoly {
            edges: self.edges.iter().map(f).collect(),
        }
    }

    pub fn try_zip(
        &self,
        other: &GraphPoly,
        f: impl Fn(&EdgePoly, &EdgePoly) -> Result<EdgePoly>,
    ) -> Result<GraphPoly> {
        if self.n_edges() != other.n_edges() {
            return Err(Error::EdgeCountMismatch {
                what: "graph polynomial",
                expected: self.n_edges(),
                found: other.n_edges(),
            });
        }
        let edges = self
            .edges
            .iter()
            .zip(&other.edges)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphPoly { edges })
    }

    pub fn scale(&self, s: f64) -> GraphPoly {
        self.map(|p| p.scale(s))
    }

    pub fn derivative(&self, order: usize) -> GraphPoly {
        self.map(|p| p.derivative(order))
    }
}

/// `u_j(t, x) = sum_{m,k} a[m][k] x^m t^k` on a single edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoly {
    pub edge: usize,
    /// Row `m` holds the coefficients of `x^m` as a polynomial in `t`.
    pub coeffs: Vec<Vec<f64>>,
}

impl SpaceTimePoly {
    pub fn new(edge: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let mut p = SpaceTimePoly { edge, coeffs };
        p.normalize();
        p.check_cap(DEFAULT_DEGREE_CAP)?;
        Ok(p)
    }

    /// `f(x) * g(t)`, the separable case.
    pub fn separable(edge: usize, in_x: &[f64], in_t: &[f64]) -> Result<Self> {
        let coeffs = in_x.iter().map(|&cx| mono::scale(in_t, cx)).collect();
        Self::new(edge, coeffs)
    }

    pub fn zero(edge: usize) -> Self {
        SpaceTimePoly {
            edge,
            coeffs: Vec::new(),
        }
    }

    fn normalize(&mut self) {
        for row in &mut self.coeffs {
            mono::trim(row);
        }
        while self.coeffs.last().is_some_and(|r| r.is_empty()) {
            self.coeffs.pop();
        }
    }

    pub fn degree_x(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn degree_t(&self) -> usize {
        self.coeffs
            .iter()
            .map(|r| mono::degree(r))
            .max()
            .unwrap_or(0)
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        let degree = self.degree_x().max(self.degree_t());
        if degree > cap {
            return Err(Error::DegreeCapExceeded { degree, cap });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * x + mono::horner(row, t))
    }

    /// Spatial profile at a fixed time.
    pub fn at_time(&self, t: f64) -> EdgePoly {
        let mut coeffs: Vec<f64> = self.coeffs.iter().map(|row| mono::horner(row, t)).collect();
        mono::trim(&mut coeffs);
        EdgePoly {
            edge: self.edge,
            coeffs,
            cap: DEFAULT_DEGREE_CAP,
        }
    }

    /// Time signal `t -> d^order/dx^order u(t, x0)` as coefficients in `t`.
    pub fn trace(&self, x0: f64, order: usize) -> Vec<f64> {
        let d = self.dx(order);
        let mut out: Vec<f64> = Vec::new();
        let mut xp = 1.0;
        for row in &d.coeffs {
            out = mono::add(&out, &mono::scale(row, xp));
            xp *= x0;
        }
        out
    }

    pub fn dx(&self, order: usize) -> SpaceTimePoly {
        let mut coeffs = Vec::new();
        for (m, row) in self.coeffs.iter().enumerate().skip(order) {
            coeffs.push(mono::scale(row, mono::falling_factorial(m, order)));
        }
        let mut p = SpaceTimePoly {
            edge: self.edge,
            coeffs,
        };
        p.normalize();
        p
    }

    pub fn dt(&self, order: usize) -> SpaceTimePoly {
        let mut p = SpaceTimePoly {
            edge: self.edge,
            coeffs: self
                .coeffs
                .iter()
                .map(|row| mono::derivative(row, order))
                .collect(),
        };
        p.normalize();
        p
    }

    pub fn add(&self, other: &SpaceTimePoly) -> SpaceTimePoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let empty = Vec::new();
        let mut p = SpaceTimePoly {
            edge: self.edge,
            coeffs: (0..n)
                .map(|m| {
                    mono::add(
                        self.coeffs.get(m).unwrap_or(&empty),
                        other.coeffs.get(m).unwrap_or(&empty),
                    )
                })
                .collect(),
        };
        p.normalize();
        p
    }

    pub fn scale(&self, s: f64) -> SpaceTimePoly {
        let mut p = SpaceTimePoly {
            edge: self.edge,
            coeffs: self.coeffs.iter().map(|r| mono::scale(r, s)).collect(),
        };
        p.normalize();
        p
    }

    pub fn product(&self, other: &SpaceTimePoly) -> Result<SpaceTimePoly> {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Ok(SpaceTimePoly::zero(self.edge));
        }
        let mut coeffs = vec![Vec::new(); self.coeffs.len() + other.coeffs.len() - 1];
        for (m, a) in self.coeffs.iter().enumerate() {
            for (n, b) in other.coeffs.iter().enumerate() {
                coeffs[m + n] = mono::add(&coeffs[m + n], &mono::product(a, b));
            }
        }
        let mut p = SpaceTimePoly {
            edge: self.edge,
            coeffs,
        };
        p.normalize();
        p.check_cap(DEFAULT_DEGREE_CAP)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> EdgePoly {
        EdgePoly::new(0, c.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p(&[0.0, 0.0, 1.0]).eval(0.5), 0.25);
        assert_eq!(EdgePoly::zero(0).eval(0.7), 0.0);
        // psi lifting on l = 1
        assert_eq!(p(&[0.0, 1.5, 0.0, -0.5]).eval(1.0), 1.0);
    }

    #[test]
    fn eval_on_rejects_points_off_the_edge() {
        let q = p(&[1.0, 1.0]);
        assert!(q.eval_on(0.0, 2.0).is_ok());
        assert!(q.eval_on(2.0, 2.0).is_ok());
        assert!(matches!(
            q.eval_on(2.5, 2.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(q.eval_on(-1e-9, 2.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p(&[0.0, 0.0, 0.0, 1.0]).derivative(3).coeffs(), &[6.0]);
        assert!(p(&[0.0, 0.0, 1.0]).derivative(3).is_zero());
        assert_eq!(
            p(&[0.0, 2.0, 0.0, 2.0]).derivative(1).coeffs(),
            &[2.0, 0.0, 6.0]
        );
        assert_eq!(p(&[3.0, 4.0]).derivative(0).coeffs(), &[3.0, 4.0]);
    }

    #[test]
    fn product_examples() {
        assert_eq!(
            p(&[1.0, 1.0]).product(&p(&[1.0, -1.0])).unwrap().coeffs(),
            &[1.0, 0.0, -1.0]
        );
        assert!(p(&[1.0, 2.0]).product(&EdgePoly::zero(0)).unwrap().is_zero());
        assert_eq!(
            p(&[0.0, 0.0, 1.0])
                .product(&p(&[0.0, 0.0, 0.0, 1.0]))
                .unwrap()
                .coeffs(),
            &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn product_errors() {
        let a = EdgePoly::new(0, vec![1.0, 1.0]).unwrap();
        let b = EdgePoly::new(1, vec![1.0]).unwrap();
        assert_eq!(
            a.product(&b),
            Err(Error::EdgeMismatch { left: 0, right: 1 })
        );
        let mut big = vec![0.0; 20];
        big[19] = 1.0;
        let q = p(&big);
        assert_eq!(
            q.product(&q),
            Err(Error::DegreeCapExceeded { degree: 38, cap: 32 })
        );
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let q = p(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(q.degree(), 1);
        assert_eq!(q.coeffs().len(), 2);
    }

    #[test]
    fn integral_is_exact() {
        // int_0^2 (1 + 3x^2) dx = 2 + 8
        assert_eq!(p(&[1.0, 0.0, 3.0]).integral(2.0), 10.0);
    }

    #[test]
    fn space_time_traces_and_derivatives() {
        // u = (1 + t) x^2 (1 - x)^2 = (1+t)(x^2 - 2x^3 + x^4)
        let u = SpaceTimePoly::separable(0, &[0.0, 0.0, 1.0, -2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(u.eval(1.0, 0.5), 2.0 * 0.0625);
        assert_eq!(u.dt(1).eval(3.0, 0.5), 0.0625);
        // u_x(t, 1) = (1+t)(2 - 6 + 4) = 0
        assert!(u.trace(1.0, 1).is_empty());
        // u_xx(t, 0) = 2 (1 + t)
        assert_eq!(u.trace(0.0, 2), vec![2.0, 2.0]);
        assert_eq!(u.at_time(1.0).coeffs(), &[0.0, 0.0, 2.0, -4.0, 2.0]);
    }

    fn coeffs_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 0..7)
    }

    proptest! {
        #[test]
        fn leibniz_rule(a in coeffs_strategy(), b in coeffs_strategy()) {
            let (pa, pb) = (p(&a), p(&b));
            let lhs = pa.product(&pb).unwrap().derivative(1);
            let rhs = pa.derivative(1).product(&pb).unwrap()
                .add(&pa.product(&pb.derivative(1)).unwrap()).unwrap();
            let n = lhs.coeffs().len().max(rhs.coeffs().len());
            for i in 0..n {
                let l = lhs.coeffs().get(i).copied().unwrap_or(0.0);
                let r = rhs.coeffs().get(i).copied().unwrap_or(0.0);
                prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs() + r.abs()));
            }
        }

        #[test]
        fn derivative_matches_centered_differences(a in prop::collection::vec(-2.0f64..2.0, 3..8), x in 0.2f64..0.8) {
            let q = p(&a);
            let exact = q.derivative(1).eval(x);
            let err = |h: f64| ((q.eval(x + h) - q.eval(x - h)) / (2.0 * h) - exact).abs();
            let (e1, e2) = (err(1e-2), err(5e-3));
            // second order: halving h divides the error by about 4
            prop_assert!(e2 <= e1 / 3.0 + 1e-11, "e1 = {e1}, e2 = {e2}");
        }
    }
}

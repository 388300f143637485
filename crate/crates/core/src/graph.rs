//! Star-graph geometry, coupling constants and boundary signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::mono;
use crate::series::CubicSeries;

/// `N` edges `(0, l_j)` joined at `x = 0`, with vertex dissipation `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarGraph {
    pub n_edges: usize,
    pub lengths: Vec<f64>,
    pub alpha: f64,
}

impl StarGraph {
    pub fn new(lengths: Vec<f64>, alpha: f64) -> Result<Self> {
        let graph = StarGraph {
            n_edges: lengths.len(),
            lengths,
            alpha,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// `N` edges of common length.
    pub fn uniform(n_edges: usize, length: f64, alpha: f64) -> Result<Self> {
        Self::new(vec![length; n_edges], alpha)
    }

    /// Checks the structural invariants, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.n_edges < 2 {
            return Err(Error::TooFewEdges(self.n_edges));
        }
        if self.lengths.len() != self.n_edges {
            return Err(Error::EdgeCountMismatch {
                what: "lengths",
                expected: self.n_edges,
                found: self.lengths.len(),
            });
        }
        if let Some((edge, &length)) = self
            .lengths
            .iter()
            .enumerate()
            .find(|(_, l)| !(**l > 0.0) || !l.is_finite())
        {
            return Err(Error::NonpositiveLength { edge, length });
        }
        let half_n = self.n_edges as f64 / 2.0;
        // strict: the vertex energy coefficient N/2 - alpha must be negative
        if !(self.alpha > half_n) {
            return Err(Error::AlphaTooSmall {
                alpha: self.alpha,
                half_n,
            });
        }
        Ok(())
    }

    pub fn length(&self, j: usize) -> f64 {
        self.lengths[j]
    }

    /// `N/2 - alpha`, strictly negative on a valid graph.
    pub fn vertex_energy_coefficient(&self) -> f64 {
        self.n_edges as f64 / 2.0 - self.alpha
    }

    pub fn has_equal_lengths(&self) -> bool {
        let l0 = self.lengths[0];
        self.lengths
            .iter()
            .all(|&l| (l - l0).abs() <= 1e-12 * l0.abs().max(1.0))
    }
}

/// Free function form of [`StarGraph::validate`].
pub fn validate_graph(graph: &StarGraph) -> Result<()> {
    graph.validate()
}

/// Linear system (no `u u_x`, no quadratic vertex term) or the full KdV system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Linear,
    Nonlinear,
}

impl Mode {
    /// Weight of the nonlinear terms: 0 or 1.
    pub fn gamma(self) -> f64 {
        match self {
            Mode::Linear => 0.0,
            Mode::Nonlinear => 1.0,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Mode::Linear),
            "nonlinear" => Ok(Mode::Nonlinear),
            other => Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("expected `linear` or `nonlinear`, got `{other}`"),
            }),
        }
    }
}

/// A control input `t -> s(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    /// Polynomial in `t`; derivatives of every order are exact.
    Poly(Vec<f64>),
    /// Sampled series with derivatives available up to `order`.
    Sampled { series: CubicSeries, order: usize },
}

impl Signal {
    pub fn zero() -> Self {
        Signal::Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Signal::poly(vec![c])
    }

    pub fn poly(mut coeffs: Vec<f64>) -> Self {
        mono::trim(&mut coeffs);
        Signal::Poly(coeffs)
    }

    pub fn sampled(points: &[[f64; 2]], order: usize) -> Result<Self> {
        if order > 3 {
            return Err(Error::InvalidSamples(format!(
                "piecewise-cubic series support derivative order at most 3, got {order}"
            )));
        }
        let series = CubicSeries::new(points)?;
        if series.len() < order + 3 {
            return Err(Error::InvalidSamples(format!(
                "order {order} needs at least {} samples",
                order + 3
            )));
        }
        Ok(Signal::Sampled { series, order })
    }

    /// Highest derivative order this signal answers; `None` means unbounded.
    pub fn declared_order(&self) -> Option<usize> {
        match self {
            Signal::Poly(_) => None,
            Signal::Sampled { order, .. } => Some(*order),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Signal::Poly(_))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Signal::Poly(c) => Ok(mono::horner(c, t)),
            Signal::Sampled { series, .. } => series.eval(t),
        }
    }

    /// `d^k s / dt^k (0)`: exact for polynomials, a one-sided
    /// second-order difference for sampled series.
    pub fn derivative_at_zero(&self, k: usize) -> Result<f64> {
        match self {
            Signal::Poly(c) => Ok(mono::derivative_at(c, k, 0.0)),
            Signal::Sampled { series, order } => {
                if k > *order {
                    return Err(Error::OrderExceeded {
                        requested: k,
                        declared: *order,
                    });
                }
                if series.first() != 0.0 {
                    return Err(Error::InvalidSamples(
                        "derivatives at zero need a sample at t = 0".into(),
                    ));
                }
                series.leading_derivative(k)
            }
        }
    }

    /// The signal `s'(t)`, one declared order lower.
    pub fn derivative(&self) -> Result<Signal> {
        match self {
            Signal::Poly(c) => Ok(Signal::Poly(mono::derivative(c, 1))),
            Signal::Sampled { series, order } => {
                if *order == 0 {
                    return Err(Error::OrderExceeded {
                        requested: 1,
                        declared: 0,
                    });
                }
                let points = series
                    .points()
                    .map(|(t, _)| series.derivative(t, 1).map(|d| [t, d]))
                    .collect::<Result<Vec<_>>>()?;
                Signal::sampled(&points, order - 1)
            }
        }
    }

    /// Time interval on which the signal is defined.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Signal::Poly(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Signal::Sampled { series, .. } => (series.first(), series.last()),
        }
    }
}

/// Free function form of [`Signal::derivative_at_zero`].
pub fn signal_derivative_at_zero(s: &Signal, k: usize) -> Result<f64> {
    s.derivative_at_zero(k)
}

/// Boundary data at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryValues {
    pub g0: f64,
    pub g: Vec<f64>,
    pub p: Vec<f64>,
}

impl BoundaryValues {
    pub fn zero(n_edges: usize) -> Self {
        BoundaryValues {
            g0: 0.0,
            g: vec![0.0; n_edges],
            p: vec![0.0; n_edges],
        }
    }

    pub fn average(&self, other: &BoundaryValues) -> BoundaryValues {
        BoundaryValues {
            g0: 0.5 * (self.g0 + other.g0),
            g: self.g.iter().zip(&other.g).map(|(a, b)| 0.5 * (a + b)).collect(),
            p: self.p.iter().zip(&other.p).map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }
}

/// Vertex flux input `g0`, outer Neumann data `g_j` and outer Dirichlet data `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySignals {
    pub g0: Signal,
    pub g: Vec<Signal>,
    pub p: Vec<Signal>,
    /// Evaluations beyond this time are rejected.
    pub horizon: f64,
}

impl BoundarySignals {
    pub fn zero(n_edges: usize) -> Self {
        BoundarySignals {
            g0: Signal::zero(),
            g: vec![Signal::zero(); n_edges],
            p: vec![Signal::zero(); n_edges],
            horizon: f64::INFINITY,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.p.len()
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn all(&self) -> impl Iterator<Item = &Signal> {
        std::iter::once(&self.g0).chain(&self.g).chain(&self.p)
    }

    pub fn is_polynomial(&self) -> bool {
        self.all().all(Signal::is_polynomial)
    }

    pub fn validate(&self, n_edges: usize, horizon: f64) -> Result<()> {
        for (what, len) in [("g", self.g.len()), ("p", self.p.len())] {
            if len != n_edges {
                return Err(Error::EdgeCountMismatch {
                    what,
                    expected: n_edges,
                    found: len,
                });
            }
        }
        for s in self.all() {
            let (lo, hi) = s.support();
            if lo > 0.0 || hi < horizon {
                return Err(Error::InvalidSamples(format!(
                    "samples cover [{lo}, {hi}] but the horizon is [0, {horizon}]"
                )));
            }
        }
        Ok(())
    }

    pub fn values(&self, t: f64) -> Result<BoundaryValues> {
        let slack = 1e-12 * self.horizon.abs().max(1.0);
        if t < -slack || t > self.horizon + slack {
            return Err(Error::OutOfDomain {
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        let t = t.clamp(0.0, self.horizon);
        Ok(BoundaryValues {
            g0: self.g0.eval(t)?,
            g: self.g.iter().map(|s| s.eval(t)).collect::<Result<_>>()?,
            p: self.p.iter().map(|s| s.eval(t)).collect::<Result<_>>()?,
        })
    }

    /// Signals differentiated once in time.
    pub fn derivative(&self) -> Result<BoundarySignals> {
        Ok(BoundarySignals {
            g0: self.g0.derivative()?,
            g: self.g.iter().map(Signal::derivative).collect::<Result<_>>()?,
            p: self.p.iter().map(Signal::derivative).collect::<Result<_>>()?,
            horizon: self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_graph_examples() {
        let ok = StarGraph {
            n_edges: 3,
            lengths: vec![1.0; 3],
            alpha: 2.0,
        };
        assert_eq!(validate_graph(&ok), Ok(()));

        let at_bound = StarGraph {
            n_edges: 2,
            lengths: vec![1.0; 2],
            alpha: 1.0,
        };
        assert!(matches!(
            validate_graph(&at_bound),
            Err(Error::AlphaTooSmall { .. })
        ));

        let degenerate = StarGraph {
            n_edges: 3,
            lengths: vec![1.0, 0.0, 1.0],
            alpha: 2.0,
        };
        assert_eq!(
            validate_graph(&degenerate),
            Err(Error::NonpositiveLength {
                edge: 1,
                length: 0.0
            })
        );

        let single = StarGraph {
            n_edges: 1,
            lengths: vec![1.0],
            alpha: 2.0,
        };
        assert_eq!(validate_graph(&single), Err(Error::TooFewEdges(1)));
    }

    #[test]
    fn validate_never_panics_on_garbage() {
        for alpha in [f64::NAN, f64::INFINITY, -1.0, 0.0] {
            for lengths in [vec![], vec![f64::NAN, 1.0], vec![1.0, -2.0], vec![1.0; 4]] {
                let g = StarGraph {
                    n_edges: lengths.len(),
                    lengths,
                    alpha,
                };
                let _ = validate_graph(&g);
            }
        }
        assert!(StarGraph::new(vec![1.0, 1.0], f64::NAN).is_err());
    }

    #[test]
    fn polynomial_signal_derivatives() {
        let s = Signal::poly(vec![0.0, 0.0, 1.0]);
        assert_eq!(s.derivative_at_zero(1).unwrap(), 0.0);
        assert_eq!(s.derivative_at_zero(2).unwrap(), 2.0);
        let s = Signal::poly(vec![3.0, 5.0]);
        assert_eq!(s.derivative_at_zero(0).unwrap(), 3.0);
        assert_eq!(s.derivative_at_zero(1).unwrap(), 5.0);
        assert_eq!(s.derivative_at_zero(7).unwrap(), 0.0);
    }

    #[test]
    fn sampled_signal_derivative_at_zero() {
        // t - t^3/6 on a fine grid; the oracle is the symbolic derivative 1 - t^2/2
        let pts: Vec<[f64; 2]> = (0..=200)
            .map(|i| i as f64 * 0.005)
            .map(|t| [t, t - t * t * t / 6.0])
            .collect();
        let s = Signal::sampled(&pts, 2).unwrap();
        assert!((s.derivative_at_zero(0).unwrap() - 0.0).abs() < 1e-15);
        assert!((s.derivative_at_zero(1).unwrap() - 1.0).abs() < 1e-8);
        assert!((s.derivative_at_zero(2).unwrap() - 0.0).abs() < 1e-6);
        assert_eq!(
            s.derivative_at_zero(3),
            Err(Error::OrderExceeded {
                requested: 3,
                declared: 2
            })
        );
        let ds = s.derivative().unwrap();
        assert_eq!(ds.declared_order(), Some(1));
        assert!((ds.eval(0.5).unwrap() - (1.0 - 0.125)).abs() < 1e-6);
    }

    #[test]
    fn values_outside_the_horizon_are_errors() {
        let signals = BoundarySignals::zero(2).with_horizon(1.0);
        assert!(signals.values(0.5).is_ok());
        assert!(signals.values(1.0).is_ok());
        assert!(signals.values(1.5).is_err());
        assert!(signals.values(-0.1).is_err());
    }

    #[test]
    fn sampled_signals_must_cover_the_horizon() {
        let pts: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 0.1, 0.0]).collect();
        let mut signals = BoundarySignals::zero(2);
        signals.g0 = Signal::sampled(&pts, 1).unwrap();
        assert!(signals.validate(2, 0.5).is_ok());
        assert!(signals.validate(2, 1.0).is_err());
        assert!(signals.validate(3, 0.5).is_err());
    }
}

//! Boundary liftings: fixed cubic profiles that carry the boundary
//! signals, so that `u = v + phi g0(t) + psi_j p_j(t) + theta_j g_j(t)`
//! turns inhomogeneous boundary data into a forcing term for `v`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discretization::GraphState;
use crate::error::{Error, Result};
use crate::graph::{BoundarySignals, BoundaryValues, StarGraph};
use crate::poly::{mono, EdgePoly, GraphPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointLocation {
    LeftEnd,
    RightEnd,
}

/// `d^order p / dx^order` at one end of the edge equals `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointConstraint {
    pub location: EndpointLocation,
    pub order: usize,
    pub target: f64,
}

impl EndpointConstraint {
    pub fn left(order: usize, target: f64) -> Self {
        EndpointConstraint {
            location: EndpointLocation::LeftEnd,
            order,
            target,
        }
    }

    pub fn right(order: usize, target: f64) -> Self {
        EndpointConstraint {
            location: EndpointLocation::RightEnd,
            order,
            target,
        }
    }

    fn point(&self, length: f64) -> f64 {
        match self.location {
            EndpointLocation::LeftEnd => 0.0,
            EndpointLocation::RightEnd => length,
        }
    }

    /// `|p^(order)(end) - target|`.
    pub fn residual(&self, p: &EdgePoly, length: f64) -> f64 {
        (p.derivative_at(self.order, self.point(length)) - self.target).abs()
    }
}

/// The polynomial of degree `constraints.len() - 1` meeting every
/// endpoint constraint.
pub fn build_constrained_poly(
    edge: usize,
    constraints: &[EndpointConstraint],
    length: f64,
) -> Result<EdgePoly> {
    let n = constraints.len();
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter {
            name: "constraints",
            reason: format!("between 1 and 6 endpoint constraints are supported, got {n}"),
        });
    }
    if !(length > 0.0) {
        return Err(Error::NonpositiveLength { edge, length });
    }
    if let Some(c) = constraints.iter().find(|c| c.order > 2) {
        return Err(Error::InvalidParameter {
            name: "constraints",
            reason: format!("derivative order {} is not 0, 1 or 2", c.order),
        });
    }
    // row r: sum_m c_m * m!/(m - order)! * x^(m - order)
    let a = DMatrix::from_fn(n, n, |r, m| {
        let c = &constraints[r];
        if m < c.order {
            0.0
        } else {
            mono::falling_factorial(m, c.order) * c.point(length).powi((m - c.order) as i32)
        }
    });
    let b = DVector::from_iterator(n, constraints.iter().map(|c| c.target));
    let lu = a.clone().lu();
    let coeffs = lu.solve(&b).ok_or(Error::SingularConstraintSystem)?;
    // nalgebra only reports exact zero pivots; catch the numerically rank-deficient case too
    let scale = a.amax().max(1.0);
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if min_pivot <= 1e-13 * scale {
        return Err(Error::SingularConstraintSystem);
    }
    EdgePoly::new(edge, coeffs.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftingTriple {
    /// Carries `g0`: common vertex value 0, `sum_j phi_j''(0) = 1`.
    pub phi: GraphPoly,
    /// Carries `p_j`: `psi_j(l_j) = 1`.
    pub psi: GraphPoly,
    /// Carries `g_j`: `theta_j'(l_j) = 1`.
    pub theta: GraphPoly,
}

fn psi_table() -> [EndpointConstraint; 4] {
    [
        EndpointConstraint::left(0, 0.0),
        EndpointConstraint::right(0, 1.0),
        EndpointConstraint::right(1, 0.0),
        EndpointConstraint::left(2, 0.0),
    ]
}

fn theta_table() -> [EndpointConstraint; 4] {
    [
        EndpointConstraint::left(0, 0.0),
        EndpointConstraint::right(0, 0.0),
        EndpointConstraint::right(1, 1.0),
        EndpointConstraint::left(2, 0.0),
    ]
}

/// Per-edge table for `phi_j`: the vertex value is pinned to 0 and the
/// unit curvature budget is split evenly, `phi_j''(0) = 1/N`.
fn phi_table(n_edges: usize) -> [EndpointConstraint; 4] {
    [
        EndpointConstraint::left(0, 0.0),
        EndpointConstraint::right(0, 0.0),
        EndpointConstraint::right(1, 0.0),
        EndpointConstraint::left(2, 1.0 / n_edges as f64),
    ]
}

pub fn build_lifting_triple(graph: &StarGraph) -> Result<LiftingTriple> {
    graph.validate()?;
    let per_edge = |table: &[EndpointConstraint]| -> Result<GraphPoly> {
        Ok(GraphPoly::new(
            (0..graph.n_edges)
                .map(|j| build_constrained_poly(j, table, graph.length(j)))
                .collect::<Result<_>>()?,
        ))
    };
    Ok(LiftingTriple {
        phi: per_edge(&phi_table(graph.n_edges))?,
        psi: per_edge(&psi_table())?,
        theta: per_edge(&theta_table())?,
    })
}

impl LiftingTriple {
    /// Largest absolute violation over all three constraint tables,
    /// including the coupled vertex conditions of `phi`.
    pub fn max_constraint_residual(&self, graph: &StarGraph) -> f64 {
        let n = graph.n_edges;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let l = graph.length(j);
            for c in psi_table() {
                worst = worst.max(c.residual(self.psi.edge(j), l));
            }
            for c in theta_table() {
                worst = worst.max(c.residual(self.theta.edge(j), l));
            }
            let phi = self.phi.edge(j);
            worst = worst.max((phi.eval(0.0) - self.phi.edge(0).eval(0.0)).abs());
            worst = worst.max(phi.eval(l).abs());
            worst = worst.max(phi.derivative_at(1, l).abs());
        }
        let curvature: f64 = (0..n).map(|j| self.phi.edge(j).derivative_at(2, 0.0)).sum();
        let vertex = -graph.alpha * self.phi.edge(0).eval(0.0) + 1.0;
        worst.max((curvature - vertex).abs())
    }

    /// `phi_j g0 + psi_j p_j + theta_j g_j` as polynomials.
    pub fn combination(&self, bv: &BoundaryValues) -> GraphPoly {
        GraphPoly::new(
            (0..self.psi.n_edges())
                .map(|j| {
                    let c = mono::add(
                        &mono::add(
                            &mono::scale(self.phi.edge(j).coeffs(), bv.g0),
                            &mono::scale(self.psi.edge(j).coeffs(), bv.p[j]),
                        ),
                        &mono::scale(self.theta.edge(j).coeffs(), bv.g[j]),
                    );
                    EdgePoly::new(j, c).expect("cubic combination stays below the degree cap")
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `u -> v = u - lifting`
    Forward,
    /// `v -> u = v + lifting`
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Objects the lifting can be added to or subtracted from.
pub trait Homogenize: Sized {
    fn homogenize(
        &self,
        lifting: &LiftingTriple,
        signals: &BoundarySignals,
        t: f64,
        direction: Direction,
    ) -> Result<Self>;
}

impl Homogenize for GraphPoly {
    fn homogenize(
        &self,
        lifting: &LiftingTriple,
        signals: &BoundarySignals,
        t: f64,
        direction: Direction,
    ) -> Result<Self> {
        let lift = lifting.combination(&signals.values(t)?);
        self.try_zip(&lift, |u, w| u.add(&w.scale(direction.sign())))
    }
}

impl Homogenize for GraphState {
    fn homogenize(
        &self,
        lifting: &LiftingTriple,
        signals: &BoundarySignals,
        t: f64,
        direction: Direction,
    ) -> Result<Self> {
        let lift = lifting.combination(&signals.values(t)?);
        let sign = direction.sign();
        let values = self
            .values
            .iter()
            .zip(&self.grids)
            .map(|(u, grid)| {
                let w = lift.edge(grid.edge);
                u.iter()
                    .enumerate()
                    .map(|(i, &ui)| ui + sign * w.eval(grid.x(i)))
                    .collect()
            })
            .collect();
        Ok(GraphState {
            t: self.t,
            grids: self.grids.clone(),
            values,
        })
    }
}

/// Free function form of [`Homogenize::homogenize`].
pub fn homogenize<T: Homogenize>(
    u: &T,
    lifting: &LiftingTriple,
    signals: &BoundarySignals,
    t: f64,
    direction: Direction,
) -> Result<T> {
    u.homogenize(lifting, signals, t, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Signal;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn psi_and_theta_on_unit_edge() {
        let psi = build_constrained_poly(0, &psi_table(), 1.0).unwrap();
        assert!(close(psi.coeffs(), &[0.0, 1.5, 0.0, -0.5]), "{psi:?}");
        let theta = build_constrained_poly(0, &theta_table(), 1.0).unwrap();
        assert!(close(theta.coeffs(), &[0.0, -0.5, 0.0, 0.5]), "{theta:?}");
        assert!((theta.derivative_at(1, 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn all_zero_targets_give_zero() {
        let table: Vec<_> = psi_table()
            .iter()
            .map(|c| EndpointConstraint { target: 0.0, ..*c })
            .collect();
        let p = build_constrained_poly(0, &table, 2.0).unwrap();
        assert!(p.coeffs().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn conflicting_constraints_are_singular() {
        let table = [
            EndpointConstraint::left(0, 0.0),
            EndpointConstraint::left(0, 1.0),
        ];
        assert_eq!(
            build_constrained_poly(0, &table, 1.0),
            Err(Error::SingularConstraintSystem)
        );
        assert!(build_constrained_poly(0, &[], 1.0).is_err());
    }

    #[test]
    fn triple_on_three_unit_edges() {
        let graph = StarGraph::uniform(3, 1.0, 2.0).unwrap();
        let lift = build_lifting_triple(&graph).unwrap();
        for j in 0..3 {
            assert!(lift.phi.edge(j).eval(0.0).abs() < 1e-15);
            assert!((lift.phi.edge(j).derivative_at(2, 0.0) - 1.0 / 3.0).abs() < 1e-14);
            assert_eq!(lift.psi.edge(j).eval(1.0), 1.0);
            assert_eq!(lift.theta.edge(j).eval(0.0), 0.0);
        }
        assert!(lift.max_constraint_residual(&graph) < 1e-13);
    }

    #[test]
    fn homogenize_examples() {
        let graph = StarGraph::new(vec![1.0, 2.0], 1.5).unwrap();
        let lift = build_lifting_triple(&graph).unwrap();
        let u = GraphPoly::from_coeffs(vec![vec![1.0, 2.0], vec![1.0, -1.0, 0.5]]).unwrap();

        let zero = BoundarySignals::zero(2);
        assert_eq!(
            homogenize(&u, &lift, &zero, 0.3, Direction::Forward).unwrap(),
            u
        );

        let mut signals = BoundarySignals::zero(2);
        signals.g0 = Signal::constant(1.0);
        let v = GraphPoly::zero(2);
        let rebuilt = homogenize(&v, &lift, &signals, 0.0, Direction::Inverse).unwrap();
        assert_eq!(rebuilt, lift.phi);
    }
}

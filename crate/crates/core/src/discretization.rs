//! Uniform edge grids, finite-difference stencils, and the coupled spatial
//! system with the `3N` vertex and outer-end conditions as constraint rows.
//!
//! Unknowns are stored edge-major, `u_j(x_i)` at `j * (M + 1) + i`. Node 0
//! of edge 0 holds the flux-balance row, node 0 of the other edges the
//! continuity rows, node `M - 1` the Neumann row and node `M` the
//! Dirichlet row; all remaining nodes carry the PDE.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BoundaryValues, Mode, StarGraph};
use crate::linalg::{BorderedLayout, SparseMatrix};
use crate::poly::GraphPoly;
use crate::series::fd_weights;

pub const MIN_INTERVALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeGrid {
    pub edge: usize,
    /// Number of intervals; the grid has `m + 1` nodes.
    pub m: usize,
    pub length: f64,
    pub h: f64,
}

impl EdgeGrid {
    pub fn new(edge: usize, length: f64, m: usize) -> Result<Self> {
        if m < MIN_INTERVALS {
            return Err(Error::GridTooCoarse(m));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::NonpositiveLength { edge, length });
        }
        Ok(EdgeGrid {
            edge,
            m,
            length,
            h: length / m as f64,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.m + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.m {
            self.length
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(|i| self.x(i))
    }
}

pub fn build_grids(graph: &StarGraph, m: usize) -> Result<Vec<EdgeGrid>> {
    (0..graph.n_edges)
        .map(|j| EdgeGrid::new(j, graph.length(j), m))
        .collect()
}

/// Nodal values on every edge at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphState {
    pub t: f64,
    pub grids: Vec<EdgeGrid>,
    pub values: Vec<Vec<f64>>,
}

impl GraphState {
    pub fn zeros(grids: &[EdgeGrid], t: f64) -> Self {
        GraphState {
            t,
            grids: grids.to_vec(),
            values: grids.iter().map(|g| vec![0.0; g.n_nodes()]).collect(),
        }
    }

    pub fn from_fn(grids: &[EdgeGrid], t: f64, f: impl Fn(usize, f64) -> f64) -> Self {
        GraphState {
            t,
            grids: grids.to_vec(),
            values: grids
                .iter()
                .map(|g| g.nodes().map(|x| f(g.edge, x)).collect())
                .collect(),
        }
    }

    pub fn from_poly(grids: &[EdgeGrid], t: f64, u: &GraphPoly) -> Self {
        Self::from_fn(grids, t, |j, x| u.edge(j).eval(x))
    }

    /// Rebuilds a state from a flat edge-major vector.
    pub fn from_flat(grids: &[EdgeGrid], t: f64, flat: &[f64]) -> Self {
        let block = grids[0].n_nodes();
        GraphState {
            t,
            grids: grids.to_vec(),
            values: flat.chunks(block).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.concat()
    }

    pub fn n_edges(&self) -> usize {
        self.values.len()
    }

    /// `u_1(t, 0)`, the vertex value carried by the first edge.
    pub fn vertex_value(&self) -> f64 {
        self.values[0][0]
    }

    /// `a * self + b * other`, keeping the time of `self`.
    pub fn combine(&self, a: f64, other: &GraphState, b: f64) -> GraphState {
        GraphState {
            t: self.t,
            grids: self.grids.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u.iter().zip(v).map(|(x, y)| a * x + b * y).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Unscaled stencil weights on unit spacing; multiply by `h^-order`.
#[derive(Debug, Clone, PartialEq)]
struct Weights {
    d1_left: Vec<f64>,
    d1_right: Vec<f64>,
    d2_left: Vec<f64>,
    d2_right: Vec<f64>,
    d3_node0: Vec<f64>,
    d3_node1: Vec<f64>,
    d3_centered: Vec<f64>,
    d3_node_m1: Vec<f64>,
    d3_node_m: Vec<f64>,
}

fn offsets(range: std::ops::Range<i32>) -> Vec<f64> {
    range.map(f64::from).collect()
}

impl Weights {
    fn new() -> Self {
        Weights {
            d1_left: fd_weights(&offsets(0..3), 0.0, 1),
            d1_right: fd_weights(&offsets(-2..1), 0.0, 1),
            d2_left: fd_weights(&offsets(0..4), 0.0, 2),
            d2_right: fd_weights(&offsets(-3..1), 0.0, 2),
            d3_node0: fd_weights(&offsets(0..5), 0.0, 3),
            d3_node1: fd_weights(&offsets(-1..4), 0.0, 3),
            d3_centered: fd_weights(&offsets(-2..3), 0.0, 3),
            d3_node_m1: fd_weights(&offsets(-3..2), 0.0, 3),
            d3_node_m: fd_weights(&offsets(-4..1), 0.0, 3),
        }
    }
}

thread_local! {
    static WEIGHTS: Weights = Weights::new();
}

fn with_weights<R>(f: impl FnOnce(&Weights) -> R) -> R {
    WEIGHTS.with(f)
}

fn dot(w: &[f64], u: &[f64]) -> f64 {
    w.iter().zip(u).map(|(a, b)| a * b).sum()
}

/// `(first node index, weights)` of the `∂x³` stencil at node `i`.
fn d3_stencil(i: usize, m: usize, w: &Weights) -> (usize, Vec<f64>) {
    match i {
        0 => (0, w.d3_node0.clone()),
        1 => (0, w.d3_node1.clone()),
        _ if i == m => (m - 4, w.d3_node_m.clone()),
        _ if i == m - 1 => (m - 4, w.d3_node_m1.clone()),
        _ => (i - 2, w.d3_centered.clone()),
    }
}

/// `∂x u`: centered in the interior, 3-point one-sided at both ends.
pub fn apply_dx(u: &[f64], grid: &EdgeGrid) -> Vec<f64> {
    let m = grid.m;
    assert_eq!(u.len(), m + 1);
    let h = grid.h;
    let mut out = vec![0.0; m + 1];
    for i in 1..m {
        out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    out[0] = dx_at_vertex(u, grid);
    out[m] = dx_at_outer(u, grid);
    out
}

/// `∂x³ u`: 5-point centered in the interior; 5-point one-sided at the
/// two nodes nearest each end.
pub fn apply_dxxx(u: &[f64], grid: &EdgeGrid) -> Vec<f64> {
    let m = grid.m;
    assert_eq!(u.len(), m + 1);
    let h3 = grid.h.powi(3);
    with_weights(|w| {
        (0..=m)
            .map(|i| {
                let (s, st) = d3_stencil(i, m, w);
                dot(&st, &u[s..s + st.len()]) / h3
            })
            .collect()
    })
}

pub fn dx_at_vertex(u: &[f64], grid: &EdgeGrid) -> f64 {
    with_weights(|w| dot(&w.d1_left, &u[..3])) / grid.h
}

pub fn dx_at_outer(u: &[f64], grid: &EdgeGrid) -> f64 {
    let m = grid.m;
    with_weights(|w| dot(&w.d1_right, &u[m - 2..])) / grid.h
}

/// 4-point one-sided `∂x² u(0)`.
pub fn dxx_at_vertex(u: &[f64], grid: &EdgeGrid) -> f64 {
    with_weights(|w| dot(&w.d2_left, &u[..4])) / (grid.h * grid.h)
}

/// 4-point one-sided `∂x² u(l)`.
pub fn dxx_at_outer(u: &[f64], grid: &EdgeGrid) -> f64 {
    let m = grid.m;
    with_weights(|w| dot(&w.d2_right, &u[m - 3..])) / (grid.h * grid.h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Pde,
    VertexContinuity,
    FluxBalance,
    RightDirichlet,
    RightNeumann,
}

/// One constraint row in the assembled system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub kind: RowKind,
    pub edge: usize,
    /// Global row (and replaced node) index.
    pub row: usize,
    /// Linear part of the row: `(column, coefficient)`.
    pub entries: Vec<(usize, f64)>,
}

/// The discrete spatial operator `-∂x[(1 + a) u] - ∂x³ u` on PDE rows and
/// the linear parts of the `3N` constraint rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSystem {
    pub graph: StarGraph,
    pub grids: Vec<EdgeGrid>,
    pub mode: Mode,
    constraints: Vec<ConstraintRow>,
}

impl SpatialSystem {
    pub fn m(&self) -> usize {
        self.grids[0].m
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges
    }

    pub fn block(&self) -> usize {
        self.m() + 1
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_edges() * self.block()
    }

    pub fn index(&self, edge: usize, node: usize) -> usize {
        edge * self.block() + node
    }

    pub fn gamma(&self) -> f64 {
        self.mode.gamma()
    }

    pub fn layout(&self) -> BorderedLayout {
        BorderedLayout {
            n_edges: self.n_edges(),
            block: self.block(),
            kl: 2,
            ku: 3,
        }
    }

    pub fn row_kind(&self, edge: usize, node: usize) -> RowKind {
        let m = self.m();
        match node {
            0 if edge == 0 => RowKind::FluxBalance,
            0 => RowKind::VertexContinuity,
            _ if node == m => RowKind::RightDirichlet,
            _ if node == m - 1 => RowKind::RightNeumann,
            _ => RowKind::Pde,
        }
    }

    /// Constraint rows ordered: continuity (edges 2..N), flux, Dirichlet
    /// (per edge), Neumann (per edge).
    pub fn constraints(&self) -> &[ConstraintRow] {
        &self.constraints
    }

    /// Rows of `-∂x[(1 + a) u] - ∂x³ u` at the PDE nodes of `edge`.
    /// `drift`, when given, holds nodal values of `a` on that edge.
    fn operator_row(&self, edge: usize, node: usize, drift: Option<&[f64]>, out: &mut Vec<(usize, f64)>) {
        let grid = &self.grids[edge];
        let (h, m) = (grid.h, grid.m);
        let c = |i: usize| 1.0 + drift.map_or(0.0, |a| a[i]);
        out.push((self.index(edge, node + 1), -c(node + 1) / (2.0 * h)));
        out.push((self.index(edge, node - 1), c(node - 1) / (2.0 * h)));
        let h3 = h.powi(3);
        with_weights(|w| {
            let (s, st) = d3_stencil(node, m, w);
            for (k, wk) in st.iter().enumerate() {
                out.push((self.index(edge, s + k), -wk / h3));
            }
        });
    }

    /// `L(a) u` at every PDE node, zero at constraint nodes.
    pub fn apply_operator(&self, state: &GraphState, drift: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let flat = state.flat();
        let mut row = Vec::new();
        (0..self.n_edges())
            .map(|j| {
                (0..self.block())
                    .map(|i| {
                        if self.row_kind(j, i) != RowKind::Pde {
                            return 0.0;
                        }
                        row.clear();
                        self.operator_row(j, i, drift.map(|d| d[j].as_slice()), &mut row);
                        row.iter().map(|&(c, v)| v * flat[c]).sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Constraint residuals (same order as [`Self::constraints`]); the flux
    /// residual includes `gamma (N/3) u_1(0)^2`.
    pub fn constraint_residual(&self, state: &GraphState, bv: &BoundaryValues) -> Vec<f64> {
        let flat = state.flat();
        let n = self.n_edges() as f64;
        let u1 = state.vertex_value();
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.entries.iter().map(|&(col, v)| v * flat[col]).sum();
                match c.kind {
                    RowKind::VertexContinuity => lhs,
                    RowKind::FluxBalance => lhs + self.gamma() * n / 3.0 * u1 * u1 - bv.g0,
                    RowKind::RightDirichlet => lhs - bv.p[c.edge],
                    RowKind::RightNeumann => lhs - bv.g[c.edge],
                    RowKind::Pde => unreachable!(),
                }
            })
            .collect()
    }

    /// Semi-discrete operator in coordinate form: `L(0)` on PDE rows and the
    /// linear constraint parts on the rest.
    pub fn operator_coo(&self) -> Vec<(usize, usize, f64)> {
        self.step_matrix(None, 0.0, 1.0, 0.0).coo_negated_pde(self)
    }

    /// Matrix of one implicit step with weight `theta`:
    /// PDE rows `u / dt - theta L(a) u`, constraint rows unchanged, plus
    /// `flux_extra * u_1(0)` on the flux row. `inv_dt = 0` with
    /// `theta = 1` gives `-L`.
    pub fn step_matrix(
        &self,
        drift: Option<&[Vec<f64>]>,
        inv_dt: f64,
        theta: f64,
        flux_extra: f64,
    ) -> StepMatrix {
        let mut a = SparseMatrix::new(self.n_unknowns(), self.n_unknowns());
        let mut row = Vec::with_capacity(8);
        for j in 0..self.n_edges() {
            for i in 0..self.block() {
                if self.row_kind(j, i) != RowKind::Pde {
                    continue;
                }
                row.clear();
                self.operator_row(j, i, drift.map(|d| d[j].as_slice()), &mut row);
                let g = self.index(j, i);
                let mut entries: Vec<(usize, f64)> = row.iter().map(|&(c, v)| (c, -theta * v)).collect();
                if inv_dt != 0.0 {
                    entries.push((g, inv_dt));
                }
                a.set_row(g, entries);
            }
        }
        for c in &self.constraints {
            let mut entries = c.entries.clone();
            if c.kind == RowKind::FluxBalance && flux_extra != 0.0 {
                entries.push((0, flux_extra));
            }
            a.set_row(c.row, entries);
        }
        StepMatrix { matrix: a }
    }

    /// Constraint right-hand sides placed at their global rows; the flux row
    /// receives `g0 - lagged_flux`.
    pub fn constraint_rhs(&self, bv: &BoundaryValues, lagged_flux: f64, rhs: &mut [f64]) {
        for c in &self.constraints {
            rhs[c.row] = match c.kind {
                RowKind::VertexContinuity => 0.0,
                RowKind::FluxBalance => bv.g0 - lagged_flux,
                RowKind::RightDirichlet => bv.p[c.edge],
                RowKind::RightNeumann => bv.g[c.edge],
                RowKind::Pde => unreachable!(),
            };
        }
    }
}

/// An assembled step matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrix {
    pub matrix: SparseMatrix,
}

impl StepMatrix {
    /// With `inv_dt = 0, theta = 1` the PDE rows hold `-L`; flip them back.
    fn coo_negated_pde(&self, system: &SpatialSystem) -> Vec<(usize, usize, f64)> {
        let mut out = self.matrix.coo();
        for (r, _, v) in out.iter_mut() {
            let (j, i) = (*r / system.block(), *r % system.block());
            if system.row_kind(j, i) == RowKind::Pde {
                *v = -*v;
            }
        }
        out
    }
}

pub fn assemble_system(graph: &StarGraph, grids: &[EdgeGrid], mode: Mode) -> Result<SpatialSystem> {
    graph.validate()?;
    if grids.len() != graph.n_edges {
        return Err(Error::EdgeCountMismatch {
            what: "grids",
            expected: graph.n_edges,
            found: grids.len(),
        });
    }
    let m = grids[0].m;
    if grids.iter().any(|g| g.m != m) {
        return Err(Error::InvalidParameter {
            name: "grids",
            reason: "every edge must carry the same node count".into(),
        });
    }
    let n = graph.n_edges;
    let idx = |j: usize, i: usize| j * (m + 1) + i;
    let w = Weights::new();
    let mut constraints = Vec::with_capacity(3 * n);
    for j in 1..n {
        constraints.push(ConstraintRow {
            kind: RowKind::VertexContinuity,
            edge: j,
            row: idx(j, 0),
            entries: vec![(idx(j, 0), 1.0), (idx(0, 0), -1.0)],
        });
    }
    let mut flux = vec![(idx(0, 0), graph.alpha)];
    for (j, g) in grids.iter().enumerate() {
        let h2 = g.h * g.h;
        flux.extend(w.d2_left.iter().enumerate().map(|(k, wk)| (idx(j, k), wk / h2)));
    }
    constraints.push(ConstraintRow {
        kind: RowKind::FluxBalance,
        edge: 0,
        row: idx(0, 0),
        entries: flux,
    });
    for j in 0..n {
        constraints.push(ConstraintRow {
            kind: RowKind::RightDirichlet,
            edge: j,
            row: idx(j, m),
            entries: vec![(idx(j, m), 1.0)],
        });
    }
    for (j, g) in grids.iter().enumerate() {
        constraints.push(ConstraintRow {
            kind: RowKind::RightNeumann,
            edge: j,
            row: idx(j, m - 1),
            entries: w
                .d1_right
                .iter()
                .enumerate()
                .map(|(k, wk)| (idx(j, m - 2 + k), wk / g.h))
                .collect(),
        });
    }
    Ok(SpatialSystem {
        graph: graph.clone(),
        grids: grids.to_vec(),
        mode,
        constraints,
    })
}

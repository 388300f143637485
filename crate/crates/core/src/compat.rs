//! Compatibility between initial data and boundary signals at `t = 0`.
//!
//! For a smooth solution the functions `phi_k = d^k u / dt^k (0, .)` are
//! determined by the initial profile through the PDE, and every boundary
//! line, differentiated `k` times in time, must hold for them at `t = 0`.
//! Which of these equalities are meaningful for data of regularity `s` is
//! decided by [`trace_requirements`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{BoundarySignals, Mode, StarGraph};
use crate::poly::GraphPoly;

pub const POLY_TOLERANCE: f64 = 1e-9;
pub const SAMPLED_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TraceKind {
    VertexContinuity,
    FluxBalance,
    RightDirichlet,
    RightNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TraceRequirement {
    pub level: usize,
    pub kind: TraceKind,
}

impl TraceRequirement {
    fn new(kind: TraceKind, level: usize) -> Self {
        TraceRequirement { kind, level }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityRecord {
    pub requirement: TraceRequirement,
    /// Edge the record refers to; `None` for the single flux-balance line.
    pub edge: Option<usize>,
    pub left: f64,
    pub right: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub s: f64,
    pub k_max: usize,
    pub mode: Mode,
    pub tol: f64,
    pub records: Vec<CompatibilityRecord>,
    pub verdict: bool,
}

impl CompatibilityReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return Err(Error::InvalidParameter {
                name: "level",
                reason: format!("binomial({n}, {k}) overflows"),
            });
        }
    }
    Ok(c as u64)
}

/// Next term of the time-derivative recursion:
/// `phi_k = -(phi_{k-1}''' + phi_{k-1}' + 1/2 sum_i C(k-1, i) (phi_i phi_{k-1-i})')`,
/// with the sum dropped in linear mode.
pub fn phi_next(history: &[GraphPoly], mode: Mode) -> Result<GraphPoly> {
    let last = history.last().ok_or(Error::InvalidParameter {
        name: "history",
        reason: "at least phi_0 is required".into(),
    })?;
    let k = history.len();
    let n_edges = last.n_edges();
    if let Some(bad) = history.iter().find(|g| g.n_edges() != n_edges) {
        return Err(Error::EdgeCountMismatch {
            what: "phi history",
            expected: n_edges,
            found: bad.n_edges(),
        });
    }
    let mut edges = Vec::with_capacity(n_edges);
    for j in 0..n_edges {
        let prev = last.edge(j);
        let mut acc = prev.derivative(3).add(&prev.derivative(1))?;
        if mode == Mode::Nonlinear {
            let mut quad = crate::poly::EdgePoly::zero(prev.edge());
            for i in 0..k {
                let c = binomial(k - 1, i)? as f64;
                let term = history[i].edge(j).product(history[k - 1 - i].edge(j))?;
                quad = quad.add(&term.scale(c))?;
            }
            acc = acc.add(&quad.derivative(1).scale(0.5))?;
        }
        edges.push(acc.scale(-1.0));
    }
    Ok(GraphPoly::new(edges))
}

/// `phi_0 = u0, phi_1, ..., phi_levels`.
pub fn phi_sequence(u0: &GraphPoly, levels: usize, mode: Mode) -> Result<Vec<GraphPoly>> {
    let mut seq = vec![u0.clone()];
    for _ in 0..levels {
        let next = phi_next(&seq, mode)?;
        seq.push(next);
    }
    Ok(seq)
}

const LEVEL_KINDS: [(f64, &[TraceKind]); 3] = [
    (
        0.5,
        &[TraceKind::VertexContinuity, TraceKind::RightDirichlet],
    ),
    (1.5, &[TraceKind::RightNeumann]),
    (2.5, &[TraceKind::FluxBalance]),
];

/// Kinds whose traces exist at a level with fractional regularity `r`
/// (`r` in `[0, 3]`); thresholds are strict, intervals closed on the right.
fn kinds_for_fraction(r: f64) -> Vec<TraceKind> {
    let mut kinds: Vec<TraceKind> = LEVEL_KINDS
        .iter()
        .filter(|(threshold, _)| r > *threshold)
        .flat_map(|(_, kinds)| kinds.iter().copied())
        .collect();
    kinds.sort();
    kinds
}

/// The trace equalities imposed on data of regularity `s`, sorted by
/// level and kind.
pub fn trace_requirements(s: f64) -> Vec<TraceRequirement> {
    if !(s > 0.5) {
        return Vec::new();
    }
    if s <= 3.0 {
        return kinds_for_fraction(s)
            .into_iter()
            .map(|kind| TraceRequirement::new(kind, 0))
            .collect();
    }
    let top = (s / 3.0).floor() as usize;
    let frac = s - 3.0 * top as f64;
    let full = kinds_for_fraction(3.0);
    let mut out: Vec<TraceRequirement> = (0..top)
        .flat_map(|k| full.iter().map(move |&kind| TraceRequirement::new(kind, k)))
        .collect();
    out.extend(
        kinds_for_fraction(frac)
            .into_iter()
            .map(|kind| TraceRequirement::new(kind, top)),
    );
    out
}

fn record(
    requirement: TraceRequirement,
    edge: Option<usize>,
    left: f64,
    right: f64,
    tol: f64,
) -> CompatibilityRecord {
    let residual = (left - right).abs();
    CompatibilityRecord {
        requirement,
        edge,
        left,
        right,
        residual,
        pass: residual <= tol * (1.0 + left.abs() + right.abs()),
    }
}

/// Evaluates every trace equality required at regularity `s`.
pub fn check_compatibility(
    s: f64,
    u0: &GraphPoly,
    signals: &BoundarySignals,
    graph: &StarGraph,
    mode: Mode,
    tol: f64,
) -> Result<CompatibilityReport> {
    graph.validate()?;
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("regularity index must be nonnegative, got {s}"),
        });
    }
    let n = graph.n_edges;
    for (what, found) in [
        ("initial data", u0.n_edges()),
        ("g", signals.g.len()),
        ("p", signals.p.len()),
    ] {
        if found != n {
            return Err(Error::EdgeCountMismatch {
                what,
                expected: n,
                found,
            });
        }
    }

    let requirements = trace_requirements(s);
    let top = requirements.iter().map(|r| r.level).max().unwrap_or(0);
    let phis = if requirements.is_empty() {
        Vec::new()
    } else {
        phi_sequence(u0, top, mode)?
    };
    let alpha = graph.alpha;
    let gamma = mode.gamma();

    let mut records = Vec::new();
    for &req in &requirements {
        let k = req.level;
        let phi = &phis[k];
        match req.kind {
            TraceKind::VertexContinuity => {
                let anchor = phi.edge(0).eval(0.0);
                for j in 1..n {
                    records.push(record(req, Some(j), phi.edge(j).eval(0.0), anchor, tol));
                }
            }
            TraceKind::FluxBalance => {
                let left: f64 = (0..n).map(|j| phi.edge(j).derivative_at(2, 0.0)).sum();
                let mut quad = 0.0;
                if gamma != 0.0 {
                    for l in 0..=k {
                        quad += binomial(k, l)? as f64
                            * phis[l].edge(0).eval(0.0)
                            * phis[k - l].edge(0).eval(0.0);
                    }
                }
                let right = -alpha * phi.edge(0).eval(0.0) - gamma * n as f64 / 3.0 * quad
                    + signals.g0.derivative_at_zero(k)?;
                records.push(record(req, None, left, right, tol));
            }
            TraceKind::RightDirichlet => {
                for j in 0..n {
                    let left = phi.edge(j).eval(graph.length(j));
                    records.push(record(req, Some(j), left, signals.p[j].derivative_at_zero(k)?, tol));
                }
            }
            TraceKind::RightNeumann => {
                for j in 0..n {
                    let left = phi.edge(j).derivative_at(1, graph.length(j));
                    records.push(record(req, Some(j), left, signals.g[j].derivative_at_zero(k)?, tol));
                }
            }
        }
    }
    let verdict = records.iter().all(|r| r.pass);
    Ok(CompatibilityReport {
        s,
        k_max: (s / 3.0).floor() as usize,
        mode,
        tol,
        records,
        verdict,
    })
}

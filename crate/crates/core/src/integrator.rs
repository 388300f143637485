//! Time stepping: the theta-scheme for the linear problem, Picard
//! iteration for the nonlinear one (per step and over a whole window),
//! and manufactured solutions.
//!
//! One step solves, at the PDE nodes,
//! `(u' - u) / dt = theta [L(a') u' + f'] + (1 - theta) [L(a) u + f]`
//! with `L(a) u = -∂x[(1 + a) u] - ∂x³ u`, while the constraint rows are
//! imposed at the new time. The nonlinear term `u u_x = ∂x(u²/2)` is
//! carried by the drift `a = w / 2` of the current iterate `w`, and the
//! vertex quadratic `(N/3) u_1(0)²` is lagged at `w_1(0)`.

use serde::Serialize;

use crate::compat::{check_compatibility, CompatibilityReport, POLY_TOLERANCE, SAMPLED_TOLERANCE};
use crate::config::SolverConfig;
use crate::diagnostics::{h1_graph, l2_graph, EnergyLedger};
use crate::discretization::{EdgeGrid, GraphState, SpatialSystem};
use crate::error::{Error, Result};
use crate::graph::{BoundarySignals, BoundaryValues, Mode, Signal, StarGraph};
use crate::linalg::{max_abs, BorderedLu};
use crate::poly::{EdgePoly, GraphPoly, SpaceTimePoly};

/// Relative residual above which a direct solve is reported as failed.
pub const LINEAR_SOLVE_TOL: f64 = 1e-8;

/// Source term `f_j(t, x)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Forcing {
    #[default]
    Zero,
    /// One space-time polynomial per edge.
    Poly(Vec<SpaceTimePoly>),
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Poly(p) => p.iter().all(|e| e.coeffs.is_empty()),
        }
    }

    pub fn value(&self, t: f64, edge: usize, x: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Poly(p) => p[edge].eval(t, x),
        }
    }

    pub fn nodal(&self, grids: &[EdgeGrid], t: f64) -> Vec<Vec<f64>> {
        grids
            .iter()
            .map(|g| g.nodes().map(|x| self.value(t, g.edge, x)).collect())
            .collect()
    }

    pub fn time_derivative(&self) -> Forcing {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Poly(p) => Forcing::Poly(p.iter().map(|e| e.dt(1)).collect()),
        }
    }

    /// Spatial profile at time `t`, when polynomial.
    pub fn at_time(&self, n_edges: usize, t: f64) -> GraphPoly {
        match self {
            Forcing::Zero => GraphPoly::zero(n_edges),
            Forcing::Poly(p) => GraphPoly::new(p.iter().map(|e| e.at_time(t)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    pub t: f64,
    pub picard_iterations: usize,
    pub picard_increment: f64,
    /// Max-norm residual of the last linear solve, relative to `1 + |rhs|`.
    pub solve_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            tol: 1e-9,
            max_iter: 50,
        }
    }
}

/// `ceil(T / dt)` steps of equal size covering `[0, T]` exactly.
pub fn step_count(horizon: f64, dt: f64) -> (usize, f64) {
    if horizon <= 0.0 {
        return (0, dt);
    }
    let n = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, horizon / n as f64)
}

/// Picard increment of one step: `|d|_L2 + sqrt(dt) |d|_H1`.
pub fn step_increment_norm(delta: &GraphState, dt: f64) -> f64 {
    l2_graph(delta) + dt.sqrt() * h1_graph(delta)
}

/// Frozen coefficients of one linear step.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepCoefficients<'a> {
    /// Drift `a` at the old time level.
    pub drift_prev: Option<&'a [Vec<f64>]>,
    /// Drift `a` at the new time level.
    pub drift_next: Option<&'a [Vec<f64>]>,
    /// Moved to the right of the flux row: `g0 - lagged_flux`.
    pub lagged_flux: f64,
    /// Added to the `u_1(0)` coefficient of the flux row.
    pub flux_extra: f64,
}

/// Theta-scheme stepper over one assembled system. The factorization of
/// the constant-coefficient matrix is cached across steps.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    pub system: &'a SpatialSystem,
    pub dt: f64,
    pub theta: f64,
    cached: Option<BorderedLu>,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a SpatialSystem, dt: f64, theta: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive, got {dt}"),
            });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("theta must lie in [0, 1], got {theta}"),
            });
        }
        Ok(Stepper {
            system,
            dt,
            theta,
            cached: None,
        })
    }

    /// Solves one step; `f_prev`/`f_next` are nodal forcing values.
    pub(crate) fn solve_step(
        &mut self,
        prev: &GraphState,
        c: &StepCoefficients,
        bv_next: &BoundaryValues,
        f_prev: &[Vec<f64>],
        f_next: &[Vec<f64>],
    ) -> Result<(GraphState, f64)> {
        let sys = self.system;
        let (dt, theta) = (self.dt, self.theta);
        let explicit = sys.apply_operator(prev, c.drift_prev);
        let mut rhs = vec![0.0; sys.n_unknowns()];
        for j in 0..sys.n_edges() {
            for i in 0..sys.block() {
                rhs[sys.index(j, i)] = prev.values[j][i] / dt
                    + (1.0 - theta) * (explicit[j][i] + f_prev[j][i])
                    + theta * f_next[j][i];
            }
        }
        sys.constraint_rhs(bv_next, c.lagged_flux, &mut rhs);

        let matrix = sys.step_matrix(c.drift_next, 1.0 / dt, theta, c.flux_extra);
        let frozen = c.drift_next.is_none() && c.flux_extra == 0.0;
        let fresh;
        let lu = if frozen {
            if self.cached.is_none() {
                self.cached = Some(BorderedLu::factor(&matrix.matrix, sys.layout())?);
            }
            self.cached.as_ref().expect("just cached")
        } else {
            fresh = BorderedLu::factor(&matrix.matrix, sys.layout())?;
            &fresh
        };
        let x = lu.solve(&rhs)?;

        let r: Vec<f64> = matrix
            .matrix
            .mul_vec(&x)
            .iter()
            .zip(&rhs)
            .map(|(a, b)| a - b)
            .collect();
        let residual = max_abs(&r) / (1.0 + max_abs(&rhs));
        if !(residual <= LINEAR_SOLVE_TOL) {
            return Err(Error::LinearSolveFailure(format!(
                "relative residual {residual:e} exceeds {LINEAR_SOLVE_TOL:e}"
            )));
        }
        Ok((GraphState::from_flat(&sys.grids, prev.t + dt, &x), residual))
    }

    pub fn step_linear(
        &mut self,
        state: &GraphState,
        signals: &BoundarySignals,
        forcing: &Forcing,
    ) -> Result<(GraphState, StepReport)> {
        let t1 = state.t + self.dt;
        let bv = signals.values(t1)?;
        let grids = &self.system.grids;
        let (f0, f1) = (forcing.nodal(grids, state.t), forcing.nodal(grids, t1));
        let (next, residual) = self.solve_step(state, &StepCoefficients::default(), &bv, &f0, &f1)?;
        Ok((
            next,
            StepReport {
                t: t1,
                picard_iterations: 1,
                picard_increment: 0.0,
                solve_residual: residual,
            },
        ))
    }

    /// Picard loop around the linear step: drift `w / 2` and the vertex
    /// quadratic frozen at the iterate `w`, starting from `w = u^n`.
    pub fn step_nonlinear(
        &mut self,
        state: &GraphState,
        signals: &BoundarySignals,
        forcing: &Forcing,
        picard: PicardSettings,
    ) -> Result<(GraphState, StepReport)> {
        let sys = self.system;
        let t1 = state.t + self.dt;
        let bv = signals.values(t1)?;
        let (f0, f1) = (forcing.nodal(&sys.grids, state.t), forcing.nodal(&sys.grids, t1));
        let n = sys.n_edges() as f64;
        let gamma = sys.gamma();
        let drift_prev = half(state, gamma);
        let mut w = state.clone();
        let mut increment = f64::INFINITY;
        for it in 1..=picard.max_iter {
            let drift_next = half(&w, gamma);
            let u1 = w.vertex_value();
            let c = StepCoefficients {
                drift_prev: Some(&drift_prev),
                drift_next: Some(&drift_next),
                lagged_flux: gamma * n / 3.0 * u1 * u1,
                flux_extra: 0.0,
            };
            let (next, residual) = self.solve_step(state, &c, &bv, &f0, &f1)?;
            increment = step_increment_norm(&next.combine(1.0, &w, -1.0), self.dt);
            w = next;
            if increment <= picard.tol {
                return Ok((
                    w,
                    StepReport {
                        t: t1,
                        picard_iterations: it,
                        picard_increment: increment,
                        solve_residual: residual,
                    },
                ));
            }
        }
        Err(Error::PicardDiverged {
            iterations: picard.max_iter,
            increment,
        })
    }

    /// Linear or nonlinear step according to the system mode.
    pub fn step(
        &mut self,
        state: &GraphState,
        signals: &BoundarySignals,
        forcing: &Forcing,
        picard: PicardSettings,
    ) -> Result<(GraphState, StepReport)> {
        match self.system.mode {
            Mode::Linear => self.step_linear(state, signals, forcing),
            Mode::Nonlinear => self.step_nonlinear(state, signals, forcing, picard),
        }
    }
}

/// `gamma * w / 2` at every node.
fn half(w: &GraphState, gamma: f64) -> Vec<Vec<f64>> {
    w.values
        .iter()
        .map(|e| e.iter().map(|v| 0.5 * gamma * v).collect())
        .collect()
}

/// One theta-scheme step of the linear problem.
pub fn step_linear(
    state: &GraphState,
    dt: f64,
    system: &SpatialSystem,
    signals: &BoundarySignals,
    forcing: &Forcing,
    theta: f64,
) -> Result<(GraphState, StepReport)> {
    Stepper::new(system, dt, theta)?.step_linear(state, signals, forcing)
}

/// One trapezoidal step of the nonlinear problem, Picard-iterated.
pub fn step_nonlinear(
    state: &GraphState,
    dt: f64,
    system: &SpatialSystem,
    signals: &BoundarySignals,
    forcing: &Forcing,
    picard_tol: f64,
    max_iter: usize,
) -> Result<(GraphState, StepReport)> {
    Stepper::new(system, dt, 0.5)?.step_nonlinear(
        state,
        signals,
        forcing,
        PicardSettings {
            tol: picard_tol,
            max_iter,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardTrace {
    /// Window-norm increment of each iteration.
    pub increments: Vec<f64>,
    /// `increments[m] / increments[m - 1]`, skipped when the divisor is 0.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Discrete window norm `max_n |u_n|_L2 + (sum_n trapezoid dt |u_n|_H1^2)^(1/2)`.
pub fn window_norm(traj: &[GraphState], dt: f64) -> f64 {
    let l2max = traj.iter().map(l2_graph).fold(0.0, f64::max);
    let n = traj.len();
    let integral: f64 = traj
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            w * dt * h1_graph(s).powi(2)
        })
        .sum();
    l2max + integral.sqrt()
}

/// Whole-window Picard iteration: each sweep marches `[0, window]` with the
/// drift and vertex quadratic frozen at the previous trajectory iterate
/// (starting from the constant trajectory `u0`).
#[allow(clippy::too_many_arguments)]
pub fn picard_window(
    u0: &GraphState,
    signals: &BoundarySignals,
    window: f64,
    system: &SpatialSystem,
    dt: f64,
    theta: f64,
    forcing: &Forcing,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<GraphState>, PicardTrace)> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window must be positive, got {window}"),
        });
    }
    if window > signals.horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("window {window} exceeds the horizon {}", signals.horizon),
        });
    }
    let (n_steps, dt) = step_count(window, dt);
    let mut stepper = Stepper::new(system, dt, theta)?;
    let grids = &system.grids;
    let times: Vec<f64> = (0..=n_steps).map(|k| u0.t + k as f64 * dt).collect();
    let bvs = times[1..]
        .iter()
        .map(|&t| signals.values(t))
        .collect::<Result<Vec<_>>>()?;
    let fs: Vec<_> = times.iter().map(|&t| forcing.nodal(grids, t)).collect();
    let gamma = system.gamma();
    let nf = system.n_edges() as f64;

    let mut frozen: Vec<GraphState> = times
        .iter()
        .map(|&t| GraphState { t, ..u0.clone() })
        .collect();
    let mut trace = PicardTrace {
        increments: Vec::new(),
        ratios: Vec::new(),
        iterations: 0,
        converged: false,
    };
    for _ in 0..max_iter {
        let drifts: Vec<_> = frozen.iter().map(|s| half(s, gamma)).collect();
        let mut traj = Vec::with_capacity(n_steps + 1);
        traj.push(u0.clone());
        for k in 0..n_steps {
            let u1 = frozen[k + 1].vertex_value();
            let c = StepCoefficients {
                drift_prev: Some(&drifts[k]),
                drift_next: Some(&drifts[k + 1]),
                lagged_flux: gamma * nf / 3.0 * u1 * u1,
                flux_extra: 0.0,
            };
            let (next, _) = stepper.solve_step(&traj[k], &c, &bvs[k], &fs[k], &fs[k + 1])?;
            traj.push(next);
        }
        let delta: Vec<GraphState> = traj
            .iter()
            .zip(&frozen)
            .map(|(a, b)| a.combine(1.0, b, -1.0))
            .collect();
        let inc = window_norm(&delta, dt);
        if let Some(&last) = trace.increments.last() {
            if last > 0.0 {
                trace.ratios.push(inc / last);
            }
        }
        trace.increments.push(inc);
        trace.iterations += 1;
        frozen = traj;
        if inc <= tol {
            trace.converged = true;
            return Ok((frozen, trace));
        }
    }
    Err(Error::PicardDiverged {
        iterations: max_iter,
        increment: trace.increments.last().copied().unwrap_or(f64::NAN),
    })
}

/// Result of marching a configuration over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    /// Initial state, every `cadence`-th step, and the final state.
    pub snapshots: Vec<GraphState>,
    pub ledger: Option<EnergyLedger>,
    pub reports: Vec<StepReport>,
    pub compat: Option<CompatibilityReport>,
    pub warnings: Vec<String>,
    pub n_steps: usize,
    pub dt: f64,
}

/// Runs the optional compatibility pre-check; a failure is a warning
/// unless `strict`.
pub fn precheck(config: &SolverConfig, strict: bool) -> Result<(Option<CompatibilityReport>, Vec<String>)> {
    let Some(spec) = &config.compat else {
        return Ok((None, Vec::new()));
    };
    let Some(u0) = config.initial.as_poly() else {
        let msg = "compatibility pre-check skipped: initial data is sampled, not polynomial";
        if strict {
            return Err(Error::RequiresPolynomialData("initial data"));
        }
        return Ok((None, vec![msg.to_string()]));
    };
    let tol = spec.tol.unwrap_or(if config.signals.is_polynomial() {
        POLY_TOLERANCE
    } else {
        SAMPLED_TOLERANCE
    });
    let report = check_compatibility(spec.s, u0, &config.signals, &config.graph, config.mode, tol)?;
    let mut warnings = Vec::new();
    if !report.verdict {
        if strict {
            return Err(Error::CompatibilityRejected {
                s: spec.s,
                failed: report.failures(),
            });
        }
        warnings.push(format!(
            "data fail {} compatibility condition(s) at s = {} (max residual {:e})",
            report.failures(),
            spec.s,
            report.max_residual()
        ));
    }
    Ok((Some(report), warnings))
}

/// Marches the configuration with snapshots at the configured cadence and
/// the energy ledger at every step.
pub fn run(config: &SolverConfig) -> Result<RunOutput> {
    run_checked(config, false)
}

pub fn run_checked(config: &SolverConfig, strict: bool) -> Result<RunOutput> {
    let (compat, warnings) = precheck(config, strict)?;
    let mut out = march(config, config.cadence, true)?;
    out.compat = compat;
    out.warnings = warnings;
    Ok(out)
}

pub(crate) fn march(config: &SolverConfig, cadence: usize, with_ledger: bool) -> Result<RunOutput> {
    let system = config.system()?;
    let (n_steps, dt) = step_count(config.horizon, config.dt);
    let mut stepper = Stepper::new(&system, dt, config.theta)?;
    let mut state = config.initial_state()?;
    let mut ledger = with_ledger.then(|| EnergyLedger::new(&config.graph, config.mode, &state));
    let mut snapshots = vec![state.clone()];
    let mut reports = Vec::with_capacity(n_steps);
    for k in 1..=n_steps {
        let (mut next, mut report) = stepper.step(&state, &config.signals, &config.forcing, config.picard)?;
        // pin the clock to k * dt so long runs do not drift
        next.t = k as f64 * dt;
        report.t = next.t;
        if let Some(l) = ledger.as_mut() {
            l.record(&state, &next, &config.signals, &config.forcing)?;
        }
        if k % cadence == 0 || k == n_steps {
            snapshots.push(next.clone());
        }
        reports.push(report);
        state = next;
    }
    Ok(RunOutput {
        snapshots,
        ledger,
        reports,
        compat: None,
        warnings: Vec::new(),
        n_steps,
        dt,
    })
}

/// A manufactured solution with the forcing, boundary signals and initial
/// data it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsProblem {
    pub exact: Vec<SpaceTimePoly>,
    pub forcing: Forcing,
    pub signals: BoundarySignals,
    pub initial: GraphPoly,
    pub mode: Mode,
}

impl MmsProblem {
    pub fn exact_state(&self, grids: &[EdgeGrid], t: f64) -> GraphState {
        GraphState::from_fn(grids, t, |j, x| self.exact[j].eval(t, x))
    }

    pub fn exact_at(&self, t: f64) -> GraphPoly {
        GraphPoly::new(self.exact.iter().map(|e| e.at_time(t)).collect())
    }
}

fn poly_signal_close(a: &[f64], b: &[f64]) -> bool {
    let n = a.len().max(b.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let scale = (0..n).fold(1.0_f64, |m, i| m.max(get(a, i).abs()).max(get(b, i).abs()));
    (0..n).all(|i| (get(a, i) - get(b, i)).abs() <= 1e-12 * scale)
}

/// `f = u_t + u_x + u_xxx (+ u u_x)` and the boundary data read off `u`
/// symbolically, so that `u` satisfies every boundary line identically.
pub fn mms_forcing(exact: &[SpaceTimePoly], graph: &StarGraph, mode: Mode) -> Result<MmsProblem> {
    graph.validate()?;
    let n = graph.n_edges;
    if exact.len() != n {
        return Err(Error::EdgeCountMismatch {
            what: "manufactured solution",
            expected: n,
            found: exact.len(),
        });
    }
    let vertex = exact[0].trace(0.0, 0);
    for (j, e) in exact.iter().enumerate().skip(1) {
        if !poly_signal_close(&e.trace(0.0, 0), &vertex) {
            return Err(Error::DiscontinuousAtVertex { edge: j });
        }
    }
    let gamma = mode.gamma();
    let forcing = exact
        .iter()
        .map(|u| {
            let mut f = u.dt(1).add(&u.dx(1)).add(&u.dx(3));
            if gamma != 0.0 {
                f = f.add(&u.product(&u.dx(1))?.scale(gamma));
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut g0 = crate::poly::mono::scale(&vertex, graph.alpha);
    for e in exact {
        g0 = crate::poly::mono::add(&g0, &e.trace(0.0, 2));
    }
    if gamma != 0.0 {
        let sq = crate::poly::mono::product(&vertex, &vertex);
        g0 = crate::poly::mono::add(&g0, &crate::poly::mono::scale(&sq, gamma * n as f64 / 3.0));
    }
    let signals = BoundarySignals {
        g0: Signal::poly(g0),
        g: exact
            .iter()
            .enumerate()
            .map(|(j, e)| Signal::poly(e.trace(graph.length(j), 1)))
            .collect(),
        p: exact
            .iter()
            .enumerate()
            .map(|(j, e)| Signal::poly(e.trace(graph.length(j), 0)))
            .collect(),
        horizon: f64::INFINITY,
    };
    let initial = GraphPoly::new(
        exact
            .iter()
            .enumerate()
            .map(|(j, e)| EdgePoly::new(j, e.at_time(0.0).coeffs().to_vec()))
            .collect::<Result<_>>()?,
    );
    Ok(MmsProblem {
        exact: exact.to_vec(),
        forcing: Forcing::Poly(forcing),
        signals,
        initial,
        mode,
    })
}

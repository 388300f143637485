//! JSON run configuration: parsing, defaults and validation.

use serde::{Deserialize, Serialize};

use crate::discretization::{assemble_system, build_grids, EdgeGrid, GraphState, SpatialSystem, MIN_INTERVALS};
use crate::error::{Error, Result};
use crate::graph::{BoundarySignals, Mode, Signal, StarGraph};
use crate::integrator::{mms_forcing, Forcing, MmsProblem, PicardSettings};
use crate::poly::{EdgePoly, GraphPoly, SpaceTimePoly};
use crate::series::CubicSeries;

pub const DEFAULT_THETA: f64 = 0.5;
pub const DEFAULT_CADENCE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n_edges: usize,
    pub lengths: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    Poly { poly: Vec<f64> },
    Samples { samples: Vec<[f64; 2]>, order: usize },
}

impl SignalSpec {
    fn zero() -> Self {
        SignalSpec::Poly { poly: Vec::new() }
    }

    fn build(&self) -> Result<Signal> {
        match self {
            SignalSpec::Poly { poly } => Ok(Signal::poly(poly.clone())),
            SignalSpec::Samples { samples, order } => Signal::sampled(samples, *order),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSpec {
    pub g0: SignalSpec,
    pub g: Vec<SignalSpec>,
    pub p: Vec<SignalSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    /// Monomial coefficients per edge.
    Poly { poly: Vec<Vec<f64>> },
    /// `[x, value]` samples per edge covering `[0, l_j]`.
    Samples { samples: Vec<Vec<[f64; 2]>> },
}

/// Per-edge space-time coefficient matrices, row `m` = coefficients of `x^m` in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeSpec {
    pub poly: Vec<Vec<Vec<f64>>>,
}

impl SpaceTimeSpec {
    fn build(&self) -> Result<Vec<SpaceTimePoly>> {
        self.poly
            .iter()
            .enumerate()
            .map(|(j, c)| SpaceTimePoly::new(j, c.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub cadence: Option<usize>,
    pub path: Option<String>,
}

/// Optional compatibility pre-check before a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatSpec {
    pub s: f64,
    pub tol: Option<f64>,
}

/// The configuration document as written, with defaults filled in by
/// [`RawConfig::with_defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub graph: GraphSpec,
    /// Omitted when `manufactured` supplies the data.
    pub signals: Option<SignalsSpec>,
    pub initial: Option<InitialSpec>,
    pub horizon: f64,
    pub nodes_per_edge: usize,
    pub dt: Option<f64>,
    pub mode: Mode,
    pub picard: Option<PicardSpec>,
    pub output: Option<OutputSpec>,
    pub theta: Option<f64>,
    pub forcing: Option<SpaceTimeSpec>,
    /// Exact solution; forcing, signals and initial data are derived from it.
    pub manufactured: Option<SpaceTimeSpec>,
    pub compat: Option<CompatSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Poly(GraphPoly),
    Sampled(Vec<CubicSeries>),
}

impl InitialData {
    pub fn as_poly(&self) -> Option<&GraphPoly> {
        match self {
            InitialData::Poly(p) => Some(p),
            InitialData::Sampled(_) => None,
        }
    }

    pub fn state(&self, grids: &[EdgeGrid]) -> Result<GraphState> {
        match self {
            InitialData::Poly(p) => Ok(GraphState::from_poly(grids, 0.0, p)),
            InitialData::Sampled(series) => {
                let values = grids
                    .iter()
                    .map(|g| g.nodes().map(|x| series[g.edge].eval(x)).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                Ok(GraphState {
                    t: 0.0,
                    grids: grids.to_vec(),
                    values,
                })
            }
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub graph: StarGraph,
    pub signals: BoundarySignals,
    pub initial: InitialData,
    pub forcing: Forcing,
    pub manufactured: Option<MmsProblem>,
    pub horizon: f64,
    /// Intervals per edge (`M`); each edge carries `M + 1` nodes.
    pub nodes_per_edge: usize,
    pub dt: f64,
    pub theta: f64,
    pub mode: Mode,
    pub picard: PicardSettings,
    pub cadence: usize,
    pub output_path: Option<String>,
    pub compat: Option<CompatSpec>,
    /// The input document with every default made explicit.
    pub resolved: RawConfig,
}

fn check_positive(name: &'static str, v: f64, path: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {v}"),
        }
        .at(path));
    }
    Ok(())
}

impl RawConfig {
    /// `dt = min_j l_j / M`, `theta = 1/2`, Picard `tol = 1e-9`,
    /// `max_iter = 50`, cadence 1.
    pub fn with_defaults(mut self) -> Self {
        let picard = PicardSettings::default();
        let m = self.nodes_per_edge.max(1) as f64;
        if self.dt.is_none() {
            let lmin = self.graph.lengths.iter().copied().fold(f64::INFINITY, f64::min);
            self.dt = Some(lmin / m);
        }
        self.theta.get_or_insert(DEFAULT_THETA);
        let p = self.picard.get_or_insert(PicardSpec {
            tol: None,
            max_iter: None,
        });
        p.tol.get_or_insert(picard.tol);
        p.max_iter.get_or_insert(picard.max_iter);
        let o = self.output.get_or_insert_with(OutputSpec::default);
        o.cadence.get_or_insert(DEFAULT_CADENCE);
        self
    }

    pub fn validate(self) -> Result<SolverConfig> {
        let raw = self.with_defaults();
        let g = &raw.graph;
        if g.lengths.len() != g.n_edges {
            return Err(Error::EdgeCountMismatch {
                what: "lengths",
                expected: g.n_edges,
                found: g.lengths.len(),
            }
            .at("graph.lengths"));
        }
        let graph = StarGraph {
            n_edges: g.n_edges,
            lengths: g.lengths.clone(),
            alpha: g.alpha,
        };
        graph.validate().map_err(|e| {
            let path = match e {
                Error::AlphaTooSmall { .. } => "graph.alpha",
                Error::NonpositiveLength { .. } => "graph.lengths",
                _ => "graph.n_edges",
            };
            e.at(path)
        })?;
        let n = graph.n_edges;
        check_positive("horizon", raw.horizon, "horizon")?;
        if raw.nodes_per_edge < MIN_INTERVALS {
            return Err(Error::GridTooCoarse(raw.nodes_per_edge).at("nodes_per_edge"));
        }
        let dt = raw.dt.expect("filled by defaults");
        check_positive("dt", dt, "dt")?;
        let theta = raw.theta.expect("filled by defaults");
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must lie in [0, 1], got {theta}"),
            }
            .at("theta"));
        }
        let p = raw.picard.as_ref().expect("filled by defaults");
        let picard = PicardSettings {
            tol: p.tol.expect("filled by defaults"),
            max_iter: p.max_iter.expect("filled by defaults"),
        };
        check_positive("tol", picard.tol, "picard.tol")?;
        if picard.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            }
            .at("picard.max_iter"));
        }
        let out = raw.output.as_ref().expect("filled by defaults");
        let cadence = out.cadence.expect("filled by defaults");
        if cadence == 0 {
            return Err(Error::InvalidParameter {
                name: "cadence",
                reason: "must be at least 1".into(),
            }
            .at("output.cadence"));
        }

        let (signals, initial, forcing, manufactured) = if let Some(m) = &raw.manufactured {
            if raw.signals.is_some() || raw.initial.is_some() || raw.forcing.is_some() {
                return Err(Error::InvalidParameter {
                    name: "manufactured",
                    reason: "a manufactured solution already determines signals, initial data and forcing".into(),
                }
                .at("manufactured"));
            }
            let exact = m.build().map_err(|e| e.at("manufactured.poly"))?;
            let mms = mms_forcing(&exact, &graph, raw.mode).map_err(|e| e.at("manufactured.poly"))?;
            (
                mms.signals.clone().with_horizon(raw.horizon),
                InitialData::Poly(mms.initial.clone()),
                mms.forcing.clone(),
                Some(mms),
            )
        } else {
            let s = raw.signals.clone().unwrap_or_else(|| SignalsSpec {
                g0: SignalSpec::zero(),
                g: vec![SignalSpec::zero(); n],
                p: vec![SignalSpec::zero(); n],
            });
            let signals = build_signals(&s, n, raw.horizon)?;
            let initial = match &raw.initial {
                None => {
                    return Err(Error::InvalidParameter {
                        name: "initial",
                        reason: "initial data is required unless `manufactured` is given".into(),
                    }
                    .at("initial"))
                }
                Some(spec) => build_initial(spec, &graph)?,
            };
            let forcing = match &raw.forcing {
                None => Forcing::Zero,
                Some(f) => {
                    let polys = f.build().map_err(|e| e.at("forcing.poly"))?;
                    if polys.len() != n {
                        return Err(Error::EdgeCountMismatch {
                            what: "forcing",
                            expected: n,
                            found: polys.len(),
                        }
                        .at("forcing.poly"));
                    }
                    Forcing::Poly(polys)
                }
            };
            (signals, initial, forcing, None)
        };
        if let Some(c) = &raw.compat {
            if !(c.s >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "s",
                    reason: format!("must be nonnegative, got {}", c.s),
                }
                .at("compat.s"));
            }
        }
        Ok(SolverConfig {
            graph,
            signals,
            initial,
            forcing,
            manufactured,
            horizon: raw.horizon,
            nodes_per_edge: raw.nodes_per_edge,
            dt,
            theta,
            mode: raw.mode,
            picard,
            cadence,
            output_path: out.path.clone(),
            compat: raw.compat.clone(),
            resolved: raw,
        })
    }
}

fn build_signals(s: &SignalsSpec, n: usize, horizon: f64) -> Result<BoundarySignals> {
    for (what, len, path) in [("g", s.g.len(), "signals.g"), ("p", s.p.len(), "signals.p")] {
        if len != n {
            return Err(Error::EdgeCountMismatch {
                what,
                expected: n,
                found: len,
            }
            .at(path));
        }
    }
    let g0 = s.g0.build().map_err(|e| e.at("signals.g0"))?;
    let g = s
        .g
        .iter()
        .enumerate()
        .map(|(j, x)| x.build().map_err(|e| e.at(format!("signals.g[{j}]"))))
        .collect::<Result<Vec<_>>>()?;
    let p = s
        .p
        .iter()
        .enumerate()
        .map(|(j, x)| x.build().map_err(|e| e.at(format!("signals.p[{j}]"))))
        .collect::<Result<Vec<_>>>()?;
    let signals = BoundarySignals {
        g0,
        g,
        p,
        horizon,
    };
    signals.validate(n, horizon).map_err(|e| e.at("signals"))?;
    Ok(signals)
}

fn build_initial(spec: &InitialSpec, graph: &StarGraph) -> Result<InitialData> {
    let n = graph.n_edges;
    let found = match spec {
        InitialSpec::Poly { poly } => poly.len(),
        InitialSpec::Samples { samples } => samples.len(),
    };
    if found != n {
        return Err(Error::EdgeCountMismatch {
            what: "initial",
            expected: n,
            found,
        }
        .at("initial"));
    }
    match spec {
        InitialSpec::Poly { poly } => Ok(InitialData::Poly(GraphPoly::new(
            poly.iter()
                .enumerate()
                .map(|(j, c)| EdgePoly::new(j, c.clone()).map_err(|e| e.at(format!("initial.poly[{j}]"))))
                .collect::<Result<_>>()?,
        ))),
        InitialSpec::Samples { samples } => {
            let series = samples
                .iter()
                .enumerate()
                .map(|(j, pts)| {
                    let path = format!("initial.samples[{j}]");
                    let s = CubicSeries::new(pts).map_err(|e| e.at(path.clone()))?;
                    let l = graph.length(j);
                    if s.first() > 0.0 || s.last() < l {
                        return Err(Error::InvalidSamples(format!(
                            "samples cover [{}, {}] but the edge is [0, {l}]",
                            s.first(),
                            s.last()
                        ))
                        .at(path));
                    }
                    Ok(s)
                })
                .collect::<Result<_>>()?;
            Ok(InitialData::Sampled(series))
        }
    }
}

/// Parses and validates a configuration document; `source` names it in
/// error messages.
pub fn parse_config_str(text: &str) -> Result<SolverConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    raw.validate()
}

pub fn parse_config(path: impl AsRef<std::path::Path>) -> Result<SolverConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

impl SolverConfig {
    pub fn grids(&self) -> Result<Vec<EdgeGrid>> {
        build_grids(&self.graph, self.nodes_per_edge)
    }

    pub fn system(&self) -> Result<SpatialSystem> {
        assemble_system(&self.graph, &self.grids()?, self.mode)
    }

    pub fn initial_state(&self) -> Result<GraphState> {
        self.initial.state(&self.grids()?)
    }

    /// The same problem with `h` and `dt` halved `level` times.
    pub fn refined(&self, level: usize) -> SolverConfig {
        let mut c = self.clone();
        let f = 1usize << level;
        c.nodes_per_edge *= f;
        c.dt /= f as f64;
        c.resolved.nodes_per_edge = c.nodes_per_edge;
        c.resolved.dt = Some(c.dt);
        c
    }

    /// Canonical JSON of the resolved configuration.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(&self.resolved).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "graph": {"n_edges": 3, "lengths": [1, 1, 1], "alpha": 2},
        "initial": {"poly": [[0.1], [0.1], [0.1]]},
        "horizon": 0.5,
        "nodes_per_edge": 16,
        "mode": "linear"
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.theta, 0.5);
        assert!((c.dt - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(c.picard.tol, 1e-9);
        assert_eq!(c.cadence, 1);
        assert!(c.signals.all().all(|s| *s == Signal::zero()));
        assert!(c.resolved_json().contains("\"theta\":0.5"));
    }

    #[test]
    fn alpha_error_names_field() {
        let text = MINIMAL.replace("\"alpha\": 2", "\"alpha\": 1.0");
        let err = parse_config_str(&text).unwrap_err();
        match &err {
            Error::Config { path, .. } => assert_eq!(path, "graph.alpha"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(err.root(), Error::AlphaTooSmall { .. }));
    }

    #[test]
    fn missing_lengths_is_parse_error() {
        let text = MINIMAL.replace("\"lengths\": [1, 1, 1], ", "");
        match parse_config_str(&text).unwrap_err() {
            Error::Parse { message, path, .. } => {
                assert!(message.contains("lengths"), "{message}");
                assert_eq!(path, "graph");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sampled_signals_and_initial() {
        let text = r#"{
            "graph": {"n_edges": 2, "lengths": [1, 2], "alpha": 1.5},
            "signals": {"g0": {"samples": [[0,0],[0.5,0],[1,0],[1.5,0]], "order": 1},
                        "g": [{"poly": []}, {"poly": [0]}], "p": [{"poly": []}, {"poly": []}]},
            "initial": {"samples": [[[0,0],[0.5,0],[1,0],[1.1,0]], [[0,0],[1,0],[2,0],[3,0]]]},
            "horizon": 1.5, "nodes_per_edge": 8, "mode": "nonlinear"
        }"#;
        let c = parse_config_str(text).unwrap();
        assert!(c.initial.as_poly().is_none());
        assert_eq!(c.initial_state().unwrap().max_abs(), 0.0);
        // samples must cover the horizon
        let short = text.replace("\"horizon\": 1.5", "\"horizon\": 2.0");
        assert!(parse_config_str(&short).is_err());
    }

    #[test]
    fn manufactured_excludes_explicit_data() {
        let text = r#"{
            "graph": {"n_edges": 2, "lengths": [1, 1], "alpha": 1.5},
            "manufactured": {"poly": [[[0.1, 0.1]], [[0.1, 0.1]]]},
            "horizon": 1, "nodes_per_edge": 8, "mode": "linear"
        }"#;
        let c = parse_config_str(text).unwrap();
        assert!(c.manufactured.is_some());
        let bad = text.replace("\"horizon\"", "\"initial\": {\"poly\": [[0],[0]]}, \"horizon\"");
        assert!(parse_config_str(&bad).is_err());
    }
}

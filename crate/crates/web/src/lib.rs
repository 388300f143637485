//! Browser bindings. Each export takes the same JSON configuration the
//! command-line tool reads and returns a JSON string shaped for plotting.

use kdvstar::compat::{check_compatibility, POLY_TOLERANCE, SAMPLED_TOLERANCE};
use kdvstar::config::parse_config_str;
use kdvstar::diagnostics::l2_graph;
use kdvstar::integrator::run;
use kdvstar::lifting::build_lifting_triple;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Snapshot cap for the page; longer runs are thinned evenly.
const MAX_FRAMES: usize = 200;

#[derive(Debug, Serialize)]
struct EdgeFrames {
    x: Vec<f64>,
    /// One row per frame.
    u: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct SimulationView {
    times: Vec<f64>,
    edges: Vec<EdgeFrames>,
    energy_times: Vec<f64>,
    energy: Vec<f64>,
    ledger_t_mid: Vec<f64>,
    ledger_residual: Vec<f64>,
    l2_error: Option<Vec<f64>>,
    max_picard_iterations: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Profile {
    x: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    theta: Vec<f64>,
}

fn thin<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let stride = (items.len() - 1).div_ceil(cap - 1);
    let mut out: Vec<T> = items.iter().step_by(stride).cloned().collect();
    if !(items.len() - 1).is_multiple_of(stride) {
        out.push(items[items.len() - 1].clone());
    }
    out
}

/// Runs the configuration and returns frames, the energy curve and the
/// ledger residual.
pub fn simulate_json(config: &str) -> Result<String, String> {
    let cfg = parse_config_str(config).map_err(|e| e.to_string())?;
    let out = run(&cfg).map_err(|e| e.to_string())?;
    let frames = thin(&out.snapshots, MAX_FRAMES);
    let edges = (0..cfg.graph.n_edges)
        .map(|j| EdgeFrames {
            x: frames[0].grids[j].nodes().collect(),
            u: frames.iter().map(|s| s.values[j].clone()).collect(),
        })
        .collect();
    let ledger = out.ledger.as_ref().expect("run records the ledger");
    let l2_error = cfg.manufactured.as_ref().map(|mms| {
        frames
            .iter()
            .map(|s| l2_graph(&s.combine(1.0, &mms.exact_state(&s.grids, s.t), -1.0)))
            .collect()
    });
    let view = SimulationView {
        times: frames.iter().map(|s| s.t).collect(),
        edges,
        energy_times: ledger.times.clone(),
        energy: ledger.energy.clone(),
        ledger_t_mid: ledger.t_mid.clone(),
        ledger_residual: ledger.residual.clone(),
        l2_error,
        max_picard_iterations: out.reports.iter().map(|r| r.picard_iterations).max().unwrap_or(0),
        warnings: out.warnings,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

/// Compatibility report at regularity `s`, in the configured mode.
pub fn check_compat_json(config: &str, s: f64) -> Result<String, String> {
    let cfg = parse_config_str(config).map_err(|e| e.to_string())?;
    let u0 = cfg
        .initial
        .as_poly()
        .ok_or_else(|| "the compatibility check needs polynomial initial data".to_string())?;
    let tol = if cfg.signals.is_polynomial() {
        POLY_TOLERANCE
    } else {
        SAMPLED_TOLERANCE
    };
    let report =
        check_compatibility(s, u0, &cfg.signals, &cfg.graph, cfg.mode, tol).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

/// Lifting profiles sampled at `samples` points per edge.
pub fn lifting_json(config: &str, samples: usize) -> Result<String, String> {
    let cfg = parse_config_str(config).map_err(|e| e.to_string())?;
    let triple = build_lifting_triple(&cfg.graph).map_err(|e| e.to_string())?;
    let samples = samples.clamp(2, 2000);
    let profiles: Vec<Profile> = (0..cfg.graph.n_edges)
        .map(|j| {
            let l = cfg.graph.length(j);
            let x: Vec<f64> = (0..samples).map(|i| l * i as f64 / (samples - 1) as f64).collect();
            let sample = |p: &kdvstar::poly::GraphPoly| x.iter().map(|&xi| p.edge(j).eval(xi)).collect();
            Profile {
                phi: sample(&triple.phi),
                psi: sample(&triple.psi),
                theta: sample(&triple.theta),
                x,
            }
        })
        .collect();
    Ok(serde_json::to_string(&profiles).expect("profiles serialize"))
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsValue> {
    simulate_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = checkCompat)]
pub fn check_compat(config: &str, s: f64) -> Result<String, JsValue> {
    check_compat_json(config, s).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lifting(config: &str, samples: usize) -> Result<String, JsValue> {
    lifting_json(config, samples).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_both_ends() {
        let v: Vec<usize> = (0..1000).collect();
        let t = thin(&v, 200);
        assert!(t.len() <= 201);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 999);
        assert_eq!(thin(&v[..10], 200).len(), 10);
    }
}

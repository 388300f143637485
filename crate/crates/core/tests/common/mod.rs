#![allow(dead_code)]

use kdvstar::config::{parse_config_str, SolverConfig};
use nalgebra::DMatrix;

/// Quintic profile per edge, all sharing the vertex value 0.5.
pub const QUINTIC: [[f64; 6]; 3] = [
    [0.5, 0.8, -1.1, 0.6, 0.3, -0.25],
    [0.5, -0.4, 0.9, -0.7, 0.5, -0.15],
    [0.5, 0.2, 0.3, -0.9, 0.6, -0.2],
];

pub const LENGTHS: [f64; 3] = [1.0, 1.25, 1.5];

/// `u_j(t, x) = amp (1 + t/2 + t²/4) P_j(x)` as a space-time coefficient
/// matrix (row m = coefficients of x^m in t).
pub fn quintic_manufactured(amp: f64) -> Vec<Vec<Vec<f64>>> {
    QUINTIC
        .iter()
        .map(|p| p.iter().map(|c| vec![amp * c, 0.5 * amp * c, 0.25 * amp * c]).collect())
        .collect()
}

pub fn mms_config(
    lengths: &[f64],
    exact: &[Vec<Vec<f64>>],
    mode: &str,
    m: usize,
    horizon: f64,
    picard_tol: f64,
) -> SolverConfig {
    let text = serde_json::json!({
        "graph": {"n_edges": lengths.len(), "lengths": lengths, "alpha": 2.0},
        "manufactured": {"poly": exact},
        "horizon": horizon,
        "nodes_per_edge": m,
        "mode": mode,
        "picard": {"tol": picard_tol, "max_iter": 50},
        "output": {"cadence": 1},
    })
    .to_string();
    parse_config_str(&text).expect("manufactured config is valid")
}

/// `x^4 (1 - x/L)^5` profile coefficients scaled by `c`, on `[0, L]`.
pub fn quartic_bump(c: f64, l: f64) -> Vec<f64> {
    // (1 - y)^5 = sum_k C(5,k) (-y)^k, y = x / L
    let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
    let mut coeffs = vec![0.0; 10];
    for k in 0..=5 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[4 + k] = c * sign * binom[k] / l.powi(k as i32 + 4);
    }
    coeffs
}

/// Linear operator and constraint rows of the discrete system, written
/// out from textbook stencils without any of the crate's assembly code.
/// PDE rows of `l` hold `-D1 - D3`; constraint rows live in `c`.
pub struct DenseOperator {
    pub l: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub is_pde: Vec<bool>,
}

pub fn dense_operator(lengths: &[f64], alpha: f64, m: usize) -> DenseOperator {
    let n = lengths.len();
    let b = m + 1;
    let size = n * b;
    let mut lmat = DMatrix::<f64>::zeros(size, size);
    let mut cmat = DMatrix::<f64>::zeros(size, size);
    let mut is_pde = vec![false; size];
    for (j, &l) in lengths.iter().enumerate() {
        let h = l / m as f64;
        let g = |i: usize| j * b + i;
        for i in 1..m - 1 {
            let r = g(i);
            is_pde[r] = true;
            lmat[(r, g(i + 1))] -= 1.0 / (2.0 * h);
            lmat[(r, g(i - 1))] += 1.0 / (2.0 * h);
            let (s, w): (usize, [f64; 5]) = if i == 1 {
                (0, [-1.5, 5.0, -6.0, 3.0, -0.5])
            } else {
                (i - 2, [-0.5, 1.0, 0.0, -1.0, 0.5])
            };
            for (k, wk) in w.iter().enumerate() {
                lmat[(r, g(s + k))] -= wk / h.powi(3);
            }
        }
        // Neumann at node m-1, Dirichlet at node m
        cmat[(g(m - 1), g(m - 2))] = 0.5 / h;
        cmat[(g(m - 1), g(m - 1))] = -2.0 / h;
        cmat[(g(m - 1), g(m))] = 1.5 / h;
        cmat[(g(m), g(m))] = 1.0;
        if j > 0 {
            cmat[(g(0), g(0))] = 1.0;
            cmat[(g(0), 0)] = -1.0;
        }
        for (k, w) in [2.0, -5.0, 4.0, -1.0].iter().enumerate() {
            cmat[(0, g(k))] += w / (h * h);
        }
    }
    cmat[(0, 0)] += alpha;
    DenseOperator {
        l: lmat,
        c: cmat,
        is_pde,
    }
}

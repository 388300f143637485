use kdvstar::discretization::{build_grids, GraphState};
use kdvstar::graph::{BoundarySignals, Signal, StarGraph};
use kdvstar::lifting::{build_lifting_triple, homogenize, Direction};
use kdvstar::poly::{EdgePoly, GraphPoly};
use proptest::prelude::*;

const HORIZON: f64 = 2.0;

fn graph_strategy() -> impl Strategy<Value = StarGraph> {
    (2usize..=5)
        .prop_flat_map(|n| (prop::collection::vec(0.5f64..3.0, n), 0.1f64..2.0))
        .prop_map(|(lengths, extra)| {
            let alpha = lengths.len() as f64 / 2.0 + extra;
            StarGraph::new(lengths, alpha).unwrap()
        })
}

fn signal_strategy() -> impl Strategy<Value = Signal> {
    prop::collection::vec(-2.0f64..2.0, 1..4).prop_map(Signal::poly)
}

fn signals_for(n: usize) -> impl Strategy<Value = BoundarySignals> {
    (
        signal_strategy(),
        prop::collection::vec(signal_strategy(), n),
        prop::collection::vec(signal_strategy(), n),
    )
        .prop_map(|(g0, g, p)| {
            let mut s = BoundarySignals::zero(g.len()).with_horizon(HORIZON);
            s.g0 = g0;
            s.g = g;
            s.p = p;
            s
        })
}

/// Per edge `c + d x + e x^2 + r3 x^3 + r4 x^4`, with `d, e` solved so the
/// outer-end value and slope hit `p_j(t)` and `g_j(t)`.
fn fit_outer_ends(graph: &StarGraph, c: f64, tails: &[[f64; 2]], signals: &BoundarySignals, t: f64) -> GraphPoly {
    let edges = (0..graph.n_edges)
        .map(|j| {
            let l = graph.length(j);
            let [r3, r4] = tails[j];
            let rest = r3 * l.powi(3) + r4 * l.powi(4);
            let rest_d = 3.0 * r3 * l * l + 4.0 * r4 * l.powi(3);
            let p = signals.p[j].eval(t).unwrap();
            let g = signals.g[j].eval(t).unwrap();
            // [l  l^2; 1  2l] [d; e] = [p - c - rest; g - rest_d]
            let (a1, a2) = (p - c - rest, g - rest_d);
            let det = l * l;
            let d = (a1 * 2.0 * l - a2 * l * l) / det;
            let e = (l * a2 - a1) / det;
            EdgePoly::new(j, vec![c, d, e, r3, r4]).unwrap()
        })
        .collect();
    GraphPoly::new(edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_then_inverse_is_identity(
        (graph, signals) in graph_strategy().prop_flat_map(|g| {
            let n = g.n_edges;
            (Just(g), signals_for(n))
        }),
        t in 0.0f64..HORIZON,
        seed in prop::collection::vec(-3.0f64..3.0, 1..64),
    ) {
        let lifting = build_lifting_triple(&graph).unwrap();
        let grids = build_grids(&graph, 12).unwrap();
        let u = GraphState::from_fn(&grids, t, |j, x| {
            let k = (j * 13 + (x * 97.0) as usize) % seed.len();
            seed[k] + x * x
        });
        let v = homogenize(&u, &lifting, &signals, t, Direction::Forward).unwrap();
        let back = homogenize(&v, &lifting, &signals, t, Direction::Inverse).unwrap();
        let dev = back.combine(1.0, &u, -1.0).max_abs();
        prop_assert!(dev <= 1e-12 * (1.0 + u.max_abs()), "deviation {dev:e}");
    }

    #[test]
    fn forward_homogenization_clears_boundary_data(
        (graph, signals) in graph_strategy().prop_flat_map(|g| {
            let n = g.n_edges;
            (Just(g), signals_for(n))
        }),
        t in 0.0f64..HORIZON,
        c in -1.0f64..1.0,
        tails in prop::collection::vec([-1.0f64..1.0, -1.0f64..1.0], 5),
        nonlinear in any::<bool>(),
    ) {
        let n = graph.n_edges;
        let u = fit_outer_ends(&graph, c, &tails, &signals, t);
        // choose g0(t) so the vertex flux line holds for u
        let quad = if nonlinear { n as f64 / 3.0 * c * c } else { 0.0 };
        let flux: f64 = (0..n).map(|j| u.edge(j).derivative_at(2, 0.0)).sum::<f64>() + graph.alpha * c + quad;
        let mut signals = signals;
        let shift = flux - signals.g0.eval(t).unwrap();
        let mut g0 = match &signals.g0 { Signal::Poly(p) => p.clone(), _ => unreachable!() };
        g0.resize(g0.len().max(1), 0.0);
        g0[0] += shift;
        signals.g0 = Signal::poly(g0);

        let lifting = build_lifting_triple(&graph).unwrap();
        let v = homogenize(&u, &lifting, &signals, t, Direction::Forward).unwrap();
        let scale = 1.0 + (0..n).map(|j| u.edge(j).coeffs().iter().map(|a| a.abs()).sum::<f64>()).sum::<f64>();
        let tol = 1e-11 * scale;
        for j in 0..n {
            let l = graph.length(j);
            prop_assert!(v.edge(j).eval(l).abs() <= tol);
            prop_assert!(v.edge(j).derivative_at(1, l).abs() <= tol);
            prop_assert!((v.edge(j).eval(0.0) - c).abs() <= tol);
        }
        let v1 = v.edge(0).eval(0.0);
        let quad_v = if nonlinear { n as f64 / 3.0 * v1 * v1 } else { 0.0 };
        let residual: f64 = (0..n).map(|j| v.edge(j).derivative_at(2, 0.0)).sum::<f64>() + graph.alpha * v1 + quad_v;
        prop_assert!(residual.abs() <= tol, "flux residual {residual:e}");

        // nodal homogenization agrees with the symbolic one
        let grids = build_grids(&graph, 10).unwrap();
        let nodal = homogenize(&GraphState::from_poly(&grids, t, &u), &lifting, &signals, t, Direction::Forward).unwrap();
        let dev = nodal.combine(1.0, &GraphState::from_poly(&grids, t, &v), -1.0).max_abs();
        prop_assert!(dev <= tol);
    }
}

#[test]
fn zero_signals_leave_states_untouched() {
    let graph = StarGraph::new(vec![1.0, 2.0, 0.5], 2.0).unwrap();
    let lifting = build_lifting_triple(&graph).unwrap();
    let grids = build_grids(&graph, 8).unwrap();
    let u = GraphState::from_fn(&grids, 0.3, |j, x| j as f64 + x.sin());
    let v = homogenize(&u, &lifting, &BoundarySignals::zero(3), 0.3, Direction::Forward).unwrap();
    assert_eq!(u, v);
}

#[test]
fn vertex_signal_alone_reconstructs_phi() {
    let graph = StarGraph::new(vec![1.0, 1.5], 1.25).unwrap();
    let lifting = build_lifting_triple(&graph).unwrap();
    let mut signals = BoundarySignals::zero(2);
    signals.g0 = Signal::constant(1.0);
    let u = homogenize(&GraphPoly::zero(2), &lifting, &signals, 0.0, Direction::Inverse).unwrap();
    for j in 0..2 {
        for x in [0.0, 0.3, 0.9] {
            assert!((u.edge(j).eval(x) - lifting.phi.edge(j).eval(x)).abs() < 1e-14);
        }
    }
}

use altmin::graph::DirectedEdge;
use altmin::instance::{gen_rank1_instance, gen_rank_r_instance, make_init, make_message_init};
use altmin::metrics::{rms, rms_fast, subspace_distance};
use altmin::solver::{
    els_collapse, els_iterate, vertex_solve_normal_equations, vls_iterate, vls_vertex_solve, Trace,
};
use altmin::{
    build_dual_graph, gen_random_regular_bipartite, Algorithm, BipartiteGraph, InitSpec, Instance,
    SolveConfig, StartState,
};
use proptest::prelude::*;

fn small_graph() -> impl Strategy<Value = BipartiteGraph> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| {
        prop::collection::vec((0..r, 0..c), 0..=12)
            .prop_map(move |edges| BipartiteGraph::from_edges(r, c, edges).unwrap())
    })
}

fn chained(a: DirectedEdge, b: DirectedEdge) -> bool {
    match (a, b) {
        (DirectedEdge::RowToCol { row: i, col: j }, DirectedEdge::ColToRow { col: k, row: l })
        | (DirectedEdge::ColToRow { col: k, row: l }, DirectedEdge::RowToCol { row: i, col: j }) => {
            j == k || l == i
        }
        _ => false,
    }
}

proptest! {
    #[test]
    fn dual_adjacency_matches_brute_force(g in small_graph()) {
        let h = build_dual_graph(&g);
        prop_assert_eq!(h.n_vertices(), 2 * g.n_edges());
        for u in 0..h.n_vertices() {
            for v in 0..h.n_vertices() {
                let expected = u != v && chained(h.vertex(u), h.vertex(v));
                prop_assert_eq!(h.neighbors(u).contains(&v), expected, "{} {}", u, v);
            }
            prop_assert!(h.neighbors(u).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn union_properties(g in small_graph(), extra in prop::collection::vec((0usize..4, 0usize..4), 0..6)) {
        let extra: Vec<(usize, usize)> = extra
            .into_iter()
            .filter(|&(i, j)| i < g.n_rows() && j < g.n_cols())
            .collect();
        let u = g.union(&extra).unwrap();
        prop_assert!(g.edges().iter().all(|&(i, j)| u.contains(i, j)));
        prop_assert!(extra.iter().all(|&(i, j)| u.contains(i, j)));
        prop_assert!(u.n_edges() <= g.n_edges() + extra.len());
        prop_assert_eq!(&g.union(&[]).unwrap(), &g);
        prop_assert_eq!(u.union(&extra).unwrap(), u.clone());
        prop_assert_eq!(u.union(g.edges()).unwrap(), u);
    }

    #[test]
    fn edge_list_round_trip(g in small_graph()) {
        let text = g.to_edge_list_string();
        let back = BipartiteGraph::read_edge_list(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_edge_list_string(), text);
    }

    #[test]
    fn regular_generator_degrees(n in 1usize..=30, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let d = 1 + ((n - 1) as f64 * frac) as usize;
        let g = gen_random_regular_bipartite(n, d, seed).unwrap();
        prop_assert_eq!(g.n_edges(), n * d);
        for v in 0..n {
            prop_assert_eq!(g.row_degree(v), d);
            prop_assert_eq!(g.col_degree(v), d);
        }
        prop_assert_eq!(gen_random_regular_bipartite(n, d, seed).unwrap(), g);
    }

    #[test]
    fn rms_gauge_invariance(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let g = gen_random_regular_bipartite(12, 3, seed).unwrap();
        let inst: Instance = gen_rank_r_instance(g, 2, seed).unwrap();
        let s = make_init(&inst, &InitSpec::uniform_range(-1.0, 1.0, seed ^ 1)).unwrap();
        // X diag(c, 1/c), Y diag(1/c, c)
        let mut t = s.clone();
        for (k, v) in t.x_mut().iter_mut().enumerate() {
            *v *= if k % 2 == 0 { scale } else { 1.0 / scale };
        }
        for (k, v) in t.y_mut().iter_mut().enumerate() {
            *v *= if k % 2 == 0 { 1.0 / scale } else { scale };
        }
        let (a, b) = (rms(&s, &inst).unwrap(), rms(&t, &inst).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        let fast = rms_fast(&s, &inst).unwrap();
        prop_assert!((a - fast).abs() <= 1e-6 * a.max(1.0));
    }

    #[test]
    fn subspace_scale_invariance(u in prop::collection::vec(0.1f64..10.0, 2..20), c in prop::sample::select(vec![-3.0, -0.5, 0.25, 7.0])) {
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
        let (a, b) = (subspace_distance(&u, &v).unwrap(), subspace_distance(&u, &cv).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn ground_truth_is_fixed_point(seed in any::<u64>()) {
        let g = gen_random_regular_bipartite(15, 3, seed).unwrap();
        let inst: Instance = gen_rank1_instance(g, 0.01, seed).unwrap();
        let gt = inst.ground_truth();
        let next = vls_iterate(&gt, &inst.view()).unwrap();
        for (a, b) in gt.x().iter().chain(gt.y()).zip(next.x().iter().chain(next.y())) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        let m = make_message_init(&inst, &InitSpec::ground_truth()).unwrap();
        let collapsed = els_collapse(&els_iterate(&m, &inst.view()).unwrap(), inst.graph()).unwrap();
        prop_assert!(rms(&collapsed, &inst).unwrap() < 1e-12);
    }

    #[test]
    fn rank1_closed_form_matches_normal_equations(pairs in prop::collection::vec((0.01f64..100.0, -10.0f64..10.0), 1..8)) {
        let ys: Vec<[f64; 1]> = pairs.iter().map(|p| [p.0]).collect();
        let targets: Vec<(&[f64], f64)> = ys.iter().zip(&pairs).map(|(y, p)| (&y[..], p.1)).collect();
        let a = vls_vertex_solve(&targets).unwrap()[0];
        let b = vertex_solve_normal_equations(&targets).unwrap()[0];
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn instance_text_round_trip(seed in any::<u64>(), rank in 1usize..=3) {
        let g = gen_random_regular_bipartite(6, 2, seed).unwrap();
        let inst: Instance = if rank == 1 {
            gen_rank1_instance(g, 0.01, seed).unwrap()
        } else {
            gen_rank_r_instance(g, rank, seed).unwrap()
        };
        let text = inst.to_text();
        let back: Instance = altmin::instance::Instance::read_text(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_text(), text);
    }
}

#[test]
fn trace_csv_round_trip() {
    let g = gen_random_regular_bipartite(20, 3, 4).unwrap();
    let inst: Instance = gen_rank1_instance(g, 0.01, 5).unwrap();
    for alg in [Algorithm::Vls, Algorithm::Els] {
        let spec = InitSpec::uniform_box(0.01, 6);
        let start = match alg {
            Algorithm::Vls => StartState::Factors(make_init(&inst, &spec).unwrap()),
            Algorithm::Els => StartState::Messages(make_message_init(&inst, &spec).unwrap()),
        };
        let sol = altmin::solver::run(&inst, start, &SolveConfig::new(alg)).unwrap();
        let csv = sol.trace.to_csv();
        let (records, status) = Trace::<f64>::parse_csv(&csv).unwrap();
        assert_eq!(records, sol.trace.records);
        assert_eq!(status, sol.trace.status);
        let rebuilt = Trace {
            records,
            status,
            final_iteration: sol.trace.final_iteration,
            seed: 0,
            wall_time: Vec::new(),
        };
        assert_eq!(rebuilt.to_csv(), csv);
    }
}

#[test]
fn f32_run_converges() {
    let g = gen_random_regular_bipartite(30, 3, 2).unwrap();
    let inst: altmin::Instance32 = gen_rank1_instance(g, 0.01, 3).unwrap();
    let init = make_init(&inst, &InitSpec::uniform_box(0.01, 4)).unwrap();
    let sol = altmin::solver::run(
        &inst,
        StartState::Factors(init),
        &SolveConfig::new(Algorithm::Vls),
    )
    .unwrap();
    assert_eq!(sol.trace.status, altmin::Status::Converged);
    let x: &altmin::solver::FactorState<f32> = &sol.state;
    assert!(x.is_finite());
}

//! Solver updates checked against grid search and dense pseudo-inverses.

use altmin::analysis::{contraction_trace, ratio_vectors};
use altmin::instance::{gen_rank1_instance_in_box, make_init};
use altmin::solver::{
    els_edge_solve, els_iterate, vertex_solve_normal_equations, vls_iterate, MessageState,
};
use altmin::{gen_random_regular_bipartite, BipartiteGraph, FactorState, InitSpec, Instance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_argmin(targets: &[(f64, f64)], step: f64) -> f64 {
    let ratios = targets.iter().map(|&(y, m)| m / y);
    let lo = ratios.clone().fold(f64::INFINITY, f64::min);
    let hi = ratios.fold(f64::NEG_INFINITY, f64::max);
    let loss = |x: f64| {
        targets
            .iter()
            .map(|&(y, m)| (x * y - m).powi(2))
            .sum::<f64>()
    };
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut best = (lo, loss(lo));
    for k in 1..=steps {
        let x = lo + k as f64 * step;
        let l = loss(x);
        if l < best.1 {
            best = (x, l);
        }
    }
    best.0
}

fn all_graphs(n: usize) -> impl Iterator<Item = BipartiteGraph> {
    (0u32..1 << (n * n)).filter_map(move |mask| {
        let edges: Vec<(usize, usize)> = (0..n * n)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| (b / n, b % n))
            .collect();
        let g = BipartiteGraph::from_edges(n, n, edges).unwrap();
        (g.min_degree() >= 1).then_some(g)
    })
}

#[test]
fn vls_update_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=3 {
        for g in all_graphs(n) {
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let inst = Instance::from_factors(g.clone(), 1, alpha, beta, None, 0).unwrap();
            let y0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let s = FactorState::new(n, 1, vec![1.0; n], y0.clone()).unwrap();
            let next = vls_iterate(&s, &inst.view()).unwrap();
            for i in 0..n {
                let t: Vec<(f64, f64)> = g
                    .row_neighbors(i)
                    .iter()
                    .map(|&j| (y0[j], inst.entry(i, j)))
                    .collect();
                assert!((grid_argmin(&t, 1e-4) - next.x()[i]).abs() < 1e-3);
            }
            for j in 0..n {
                let t: Vec<(f64, f64)> = g
                    .col_neighbors(j)
                    .iter()
                    .map(|&i| (next.x()[i], inst.entry(i, j)))
                    .collect();
                assert!((grid_argmin(&t, 1e-4) - next.y()[j]).abs() < 1e-3);
            }
        }
    }
}

#[test]
fn els_message_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let k = rng.gen_range(1..=4);
        let t: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.gen_range(0.5..1.5), rng.gen_range(0.25..2.25)))
            .collect();
        let ys: Vec<[f64; 1]> = t.iter().map(|p| [p.0]).collect();
        let targets: Vec<(&[f64], f64)> = ys.iter().zip(&t).map(|(y, p)| (&y[..], p.1)).collect();
        let x = els_edge_solve(&targets).unwrap()[0];
        assert!((grid_argmin(&t, 1e-4) - x).abs() < 1e-3);
    }
}

#[test]
fn rank2_solve_matches_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let deg = rng.gen_range(1..=6);
        let mut rows: Vec<[f64; 2]> = (0..deg)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        if case % 10 == 0 {
            // collinear targets: rank-deficient Gram matrix
            let c = rows[0];
            for (k, r) in rows.iter_mut().enumerate() {
                *r = [c[0] * (k as f64 + 1.0), c[1] * (k as f64 + 1.0)];
            }
        }
        let m: Vec<f64> = (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<(&[f64], f64)> = rows.iter().zip(&m).map(|(r, &v)| (&r[..], v)).collect();
        let x = vertex_solve_normal_equations(&targets).unwrap();
        let a = DMatrix::from_fn(deg, 2, |i, k| rows[i][k]);
        let oracle = a.pseudo_inverse(1e-12).unwrap() * DMatrix::from_column_slice(deg, 1, &m);
        for k in 0..2 {
            assert!(
                (x[k] - oracle[k]).abs() <= 1e-9 * oracle[k].abs().max(1.0),
                "case {case}: {x:?} vs {oracle}"
            );
        }
    }
}

#[test]
fn rank1_iterates_stay_in_bounds_and_envelopes_shrink() {
    for seed in 0..5 {
        let b = 0.1;
        let g = gen_random_regular_bipartite(40, 3, seed).unwrap();
        let inst: Instance = gen_rank1_instance_in_box(g, b, (b, 1.0 / b), seed).unwrap();
        let mut s = make_init(&inst, &InitSpec::uniform_box(b, seed + 9)).unwrap();
        let (lo, hi) = (b.powi(3), b.powi(-3));
        let mut series = Vec::new();
        for t in 0..200 {
            s = vls_iterate(&s, &inst.view()).unwrap();
            assert!(
                s.x().iter().chain(s.y()).all(|&v| v >= lo && v <= hi),
                "seed {seed} t {t}"
            );
            let r = ratio_vectors(&s, &inst).unwrap();
            assert!(r
                .u
                .iter()
                .chain(&r.v)
                .all(|&v| v >= b * b && v <= 1.0 / (b * b)));
            series.push((t + 1, r.u));
        }
        let rep = contraction_trace(&series).unwrap();
        assert!(
            rep.envelope_violations.is_empty(),
            "seed {seed}: {:?}",
            rep.envelope_violations
        );
        assert!(rep.points.last().unwrap().spread < rep.points[0].spread);
    }
}

#[test]
fn els_messages_stay_positive() {
    let g = gen_random_regular_bipartite(30, 3, 7).unwrap();
    let inst: Instance = gen_rank1_instance_in_box(g.clone(), 0.1, (0.1, 10.0), 7).unwrap();
    let init = make_init(&inst, &InitSpec::uniform_box(0.1, 8)).unwrap();
    let mut m = MessageState::replicate(&g, &init);
    for _ in 0..100 {
        m = els_iterate(&m, &inst.view()).unwrap();
        assert!(m
            .x_msgs()
            .iter()
            .chain(m.y_msgs())
            .all(|&v| v > 0.0 && v.is_finite()));
    }
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use altmin::analysis::{diagnose, verify_window, window_product, DiagnosticConfig};
use altmin::instance::{
    gen_rank1_instance, gen_split_rank1_instance, make_init, make_message_init,
};
use altmin::metrics::subspace_distance;
use altmin::solver::{run, vertex_solve_normal_equations, vls_iterate};
use altmin::{
    Algorithm, BipartiteGraph, FactorState, InitSpec, Instance, SolveConfig, StartState, Status,
};
use altmin_cli::commands::{cmd_sweep, SweepArgs};
use altmin_cli::experiments::{
    compare, gen_connected_regular, sweep, InitKind, ProblemSpec, SweepConfig, SweepRow,
};
use altmin_cli::threshold::crossing;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const B: f64 = 0.01;

fn start(inst: &Instance, spec: &InitSpec<f64>, alg: Algorithm) -> StartState<f64> {
    match alg {
        Algorithm::Vls => StartState::Factors(make_init(inst, spec).unwrap()),
        Algorithm::Els => StartState::Messages(make_message_init(inst, spec).unwrap()),
    }
}

fn regular_instance(n: usize, seed: u64) -> Instance {
    let g = gen_connected_regular(n, 3, seed).unwrap();
    gen_rank1_instance(g, B, seed ^ 0xA5A5).unwrap()
}

fn convergence(alg: Algorithm) -> Outcome {
    let config = SolveConfig {
        max_iterations: 5000,
        rms_tolerance: 1e-6,
        record_every: 5000,
        ..SolveConfig::new(alg)
    };
    let mut worst = 0;
    let mut failed = Vec::new();
    for seed in 0..20 {
        let inst = regular_instance(100, seed);
        let sol = run(
            &inst,
            start(&inst, &InitSpec::uniform_box(B, seed + 1000), alg),
            &config,
        )
        .unwrap();
        if sol.trace.status != Status::Converged {
            failed.push(seed);
        }
        worst = worst.max(sol.trace.final_iteration);
    }
    if failed.is_empty() {
        Ok(format!("20/20 seeds below 1e-6, worst {worst} iterations"))
    } else {
        Err(format!(
            "seeds {failed:?} did not reach 1e-6 in 5000 iterations"
        ))
    }
}

fn adversarial_start() -> Outcome {
    let b = 0.1;
    let config = SolveConfig {
        max_iterations: 2_000_000,
        rms_tolerance: 1e-6,
        record_every: 100_000,
        ..SolveConfig::new(Algorithm::Vls)
    };
    let mut iters = Vec::new();
    for seed in 0..10 {
        let g = gen_connected_regular(100, 3, seed).unwrap();
        let inst: Instance = gen_split_rank1_instance(g, b, seed ^ 0x5A5A).unwrap();
        let init = make_init(&inst, &InitSpec::adversarial_split(b, seed + 1000)).unwrap();
        let d0 = subspace_distance(init.x(), inst.alpha()).unwrap();
        if !(d0 > 0.5) {
            return Err(format!(
                "seed {seed}: initial subspace distance {d0} not above 1/2"
            ));
        }
        let sol = run(&inst, StartState::Factors(init), &config).unwrap();
        if sol.trace.status != Status::Converged {
            return Err(format!(
                "seed {seed}: {} after {} iterations, rms {:e}",
                sol.trace.status,
                sol.trace.final_iteration,
                sol.trace.final_rms()
            ));
        }
        iters.push(sol.trace.final_iteration);
    }
    Ok(format!(
        "10/10 seeds below 1e-6 from distance {:.4}, iterations min {} max {}",
        1.0 - 4.0 * b.powi(4) / (1.0 + b.powi(4)).powi(2),
        iters.iter().min().unwrap(),
        iters.iter().max().unwrap()
    ))
}

fn transition_invariants() -> Outcome {
    let mut runs = 0;
    let mut min_entry = f64::INFINITY;
    for n in [10, 100] {
        for seed in 0..10 {
            let inst = regular_instance(n, seed);
            for alg in [Algorithm::Vls, Algorithm::Els] {
                let config = DiagnosticConfig {
                    algorithm: alg,
                    iterations: 300,
                    b: B,
                    keep_matrices: 0,
                };
                let report = diagnose(
                    &inst,
                    start(&inst, &InitSpec::uniform_box(B, seed + 1000), alg),
                    &config,
                )
                .unwrap();
                if let Some(v) = report.violations.first() {
                    return Err(format!(
                        "{alg} n={n} seed={seed}: {} violations, first at t={} {:?}: {}",
                        report.violations.len(),
                        v.t,
                        v.kind,
                        v.detail
                    ));
                }
                min_entry = report
                    .rows
                    .iter()
                    .map(|r| r.min_nonzero_p)
                    .fold(min_entry, f64::min);
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} runs x 300 steps, zero violations; smallest non-zero entry {min_entry:e} vs bound {:e}",
        B.powi(6) / 3.0
    ))
}

fn window_positivity() -> Outcome {
    let steps = 60;
    let mut windows = 0;
    let mut min_entry = f64::INFINITY;
    for seed in 0..5 {
        let inst = regular_instance(20, seed);
        let d = inst.graph().diameter().unwrap();
        let config = DiagnosticConfig {
            algorithm: Algorithm::Vls,
            iterations: steps,
            b: B,
            keep_matrices: steps,
        };
        let report = diagnose(
            &inst,
            start(
                &inst,
                &InitSpec::uniform_box(B, seed + 1000),
                Algorithm::Vls,
            ),
            &config,
        )
        .unwrap();
        for s in 0..=(steps - d) {
            let q = window_product(&report.matrices[s..], d).unwrap();
            let w = verify_window(&q, report.z, d);
            if !w.strictly_positive || w.below_bound > 0 {
                return Err(format!(
                    "seed {seed}, window at t={}: min entry {:e}, {} entries below z^d",
                    s + 1,
                    w.min_entry,
                    w.below_bound
                ));
            }
            min_entry = min_entry.min(w.min_entry);
            windows += 1;
        }
    }
    Ok(format!(
        "{windows} diameter-length windows strictly positive, smallest entry {min_entry:e}"
    ))
}

fn els_ahead_of_vls() -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..20 {
        let spec = ProblemSpec {
            n: 100,
            degree: 3,
            rank: 1,
            b: B,
            init: InitKind::Uniform,
            seed,
            ..ProblemSpec::default()
        };
        let inst = altmin_cli::experiments::build_problem(&spec).unwrap();
        let config = SolveConfig {
            max_iterations: 5000,
            ..SolveConfig::new(Algorithm::Vls)
        };
        let cmp = compare(&inst, &spec, &config).unwrap();
        let v = cmp.first_below(Algorithm::Vls, 1e-3);
        let e = cmp.first_below(Algorithm::Els, 1e-3);
        match (v, e) {
            (Some(v), Some(e)) if e < v => wins += 1,
            _ => detail.push(format!("seed {seed}: vls {v:?} els {e:?}")),
        }
    }
    let msg = format!("ELS earlier on {wins}/20 seeds {}", detail.join("; "));
    if wins >= 18 {
        Ok(msg.trim_end().to_string())
    } else {
        Err(msg)
    }
}

fn curve(rows: &[SweepRow], alg: Algorithm) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.algorithm == alg)
        .map(|r| (r.c, r.failure_fraction))
        .collect()
}

fn threshold_sweep() -> Outcome {
    let mut config = SweepConfig::new(2, 100);
    config.trials = 50;
    config.seed = 2024;
    config.workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let rows = sweep(&config).unwrap();
    let els = curve(&rows, Algorithm::Els);
    let vls = curve(&rows, Algorithm::Vls);
    let fmt = |c: &[(f64, f64)]| {
        c.iter()
            .map(|p| format!("{}", p.1))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let summary = format!("els [{}] vls [{}]", fmt(&els), fmt(&vls));
    if els[0].1 < 0.9 {
        return Err(format!(
            "ELS failure fraction at c=0 is {} < 0.9; {summary}",
            els[0].1
        ));
    }
    if els.last().unwrap().1 > 0.1 {
        return Err(format!("ELS failure fraction at c=20 above 0.1; {summary}"));
    }
    if let Some(w) = els.windows(2).find(|w| w[1].1 > w[0].1 + 0.1) {
        return Err(format!(
            "ELS curve rises from {:?} to {:?}; {summary}",
            w[0], w[1]
        ));
    }
    let (ce, cv) = (crossing(&els), crossing(&vls));
    match (ce, cv) {
        (Some(ce), Some(cv)) if cv > ce => Ok(format!(
            "0.5-crossing ELS c={ce:.3} < VLS c={cv:.3}; {summary}"
        )),
        _ => Err(format!("crossings ELS {ce:?} VLS {cv:?}; {summary}")),
    }
}

/// Minimizer of `sum (x y_k - m_k)^2` over a 1e-4 grid spanning
/// `[min m/y, max m/y]`, which contains the exact minimizer.
fn grid_minimizer(targets: &[(f64, f64)]) -> f64 {
    let ratios = targets.iter().map(|&(y, m)| m / y);
    let lo = ratios.clone().fold(f64::INFINITY, f64::min);
    let hi = ratios.fold(f64::NEG_INFINITY, f64::max);
    let steps = ((hi - lo) / 1e-4).ceil() as usize;
    let loss = |x: f64| {
        targets
            .iter()
            .map(|&(y, m)| (x * y - m).powi(2))
            .sum::<f64>()
    };
    (0..=steps)
        .map(|k| lo + k as f64 * 1e-4)
        .map(|x| (x, loss(x)))
        .fold(
            (lo, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
        .0
}

fn small_graphs(n: usize) -> Vec<BipartiteGraph> {
    (0u32..1 << (n * n))
        .filter_map(|mask| {
            let edges: Vec<(usize, usize)> = (0..n * n)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| (b / n, b % n))
                .collect();
            let g = BipartiteGraph::from_edges(n, n, edges).unwrap();
            (g.min_degree() >= 1).then_some(g)
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let per_graph = if n < 3 { 5 } else { 1 };
        for g in small_graphs(n) {
            for _ in 0..per_graph {
                let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
                let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
                let inst = Instance::from_factors(g.clone(), 1, alpha, beta, None, 0).unwrap();
                let y0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
                let state = FactorState::new(n, 1, vec![1.0; n], y0.clone()).unwrap();
                let next = vls_iterate(&state, &inst.view()).unwrap();
                for i in 0..n {
                    let t: Vec<(f64, f64)> = g
                        .row_neighbors(i)
                        .iter()
                        .map(|&j| (y0[j], inst.entry(i, j)))
                        .collect();
                    worst = worst.max((grid_minimizer(&t) - next.x()[i]).abs());
                    checked += 1;
                }
                for j in 0..n {
                    let t: Vec<(f64, f64)> = g
                        .col_neighbors(j)
                        .iter()
                        .map(|&i| (next.x()[i], inst.entry(i, j)))
                        .collect();
                    worst = worst.max((grid_minimizer(&t) - next.y()[j]).abs());
                    checked += 1;
                }
            }
        }
    }
    if worst > 1e-3 {
        return Err(format!(
            "grid search differs from a vertex update by {worst:e}"
        ));
    }

    // rank 2 against a dense pseudo-inverse
    let mut worst_pinv: f64 = 0.0;
    for _ in 0..100 {
        let deg = rng.gen_range(1..=6);
        let rows: Vec<[f64; 2]> = (0..deg)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let m: Vec<f64> = (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets: Vec<(&[f64], f64)> = rows.iter().zip(&m).map(|(r, &v)| (&r[..], v)).collect();
        let x = vertex_solve_normal_equations(&targets).unwrap();
        let a = DMatrix::from_fn(deg, 2, |i, k| rows[i][k]);
        let oracle = a.pseudo_inverse(1e-12).unwrap() * DMatrix::from_column_slice(deg, 1, &m);
        for k in 0..2 {
            let scale = oracle[k].abs().max(1.0);
            worst_pinv = worst_pinv.max((x[k] - oracle[k]).abs() / scale);
        }
    }
    if worst_pinv > 1e-9 {
        return Err(format!(
            "rank-2 solve differs from the pseudo-inverse by {worst_pinv:e}"
        ));
    }
    Ok(format!(
        "{checked} vertex updates within {worst:.2e} of the grid minimizer; 100 rank-2 solves within {worst_pinv:.1e} of pinv"
    ))
}

fn sweep_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("altmin-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 8] {
        let out = dir.join(format!("sweep-{workers}.csv"));
        let args = SweepArgs {
            rank: 2,
            n: 40,
            planted_degree: None,
            c_grid: "0:8:2".into(),
            trials: 10,
            threshold: 1e-3,
            max_iter: 500,
            algs: "vls,els".into(),
            seed: 77,
            workers: Some(workers),
            out: Some(out.clone()),
            svg: None,
        };
        cmd_sweep(&args).unwrap();
        outputs.push(std::fs::read(&out).unwrap());
    }
    std::fs::remove_dir_all(&dir).unwrap();
    if outputs[0] == outputs[1] {
        Ok(format!(
            "{} bytes identical under 1 and 8 workers",
            outputs[0].len()
        ))
    } else {
        Err("CSV differs between 1 and 8 workers".into())
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("VLS convergence, n=100 3-regular, 20 seeds", || {
            convergence(Algorithm::Vls)
        }),
        ("ELS convergence, n=100 3-regular, 20 seeds", || {
            convergence(Algorithm::Els)
        }),
        ("adversarial split start, b=0.1", adversarial_start),
        (
            "transition-matrix invariants, n in {10, 100}",
            transition_invariants,
        ),
        ("window products strictly positive, n=20", window_positivity),
        (
            "ELS ahead of VLS on normalized iterations",
            els_ahead_of_vls,
        ),
        ("rank-2 failure-fraction sweep", threshold_sweep),
        ("grid-search and pseudo-inverse oracles", oracle_equivalence),
        ("sweep CSV independent of worker count", sweep_determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS ({name}, {secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} FAIL ({name}, {secs:.1}s): {detail}", k + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}

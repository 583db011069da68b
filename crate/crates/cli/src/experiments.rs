//! Problem construction, the two-algorithm comparison and the failure
//! fraction sweep.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use altmin::instance::{
    gen_rank1_instance_in_box, gen_rank_r_instance, gen_split_rank1_instance, make_init,
    make_message_init, EXPERIMENT_BOX,
};
use altmin::metrics;
use altmin::solver::{els_collapse, iteration_cost, run, Solution};
use altmin::{
    gen_er_edges, gen_random_regular_bipartite, Algorithm, BipartiteGraph, InitSpec, Instance,
    SolveConfig, StartState, Status,
};
use rayon::prelude::*;

use crate::CliError;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `master` along `path`. Distinct paths give unrelated
/// streams regardless of the order in which they are requested.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

// stream tags
const GRAPH: u64 = 1;
const ER: u64 = 2;
const FACTORS: u64 = 3;
const INIT: u64 = 4;

fn algorithm_tag(alg: Algorithm) -> u64 {
    match alg {
        Algorithm::Vls => 1,
        Algorithm::Els => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Uniform,
    Adversarial,
    GroundTruth,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Adversarial => "adversarial",
            InitKind::GroundTruth => "ground-truth",
        }
    }
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(InitKind::Uniform),
            "adversarial" => Ok(InitKind::Adversarial),
            "ground-truth" => Ok(InitKind::GroundTruth),
            other => Err(format!(
                "unknown init `{other}` (uniform, adversarial, ground-truth)"
            )),
        }
    }
}

/// Everything needed to build one instance and its initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub graph_file: Option<PathBuf>,
    pub n: usize,
    pub degree: usize,
    pub er_c: f64,
    pub rank: usize,
    /// Rank 1: entry bound of factors and initialization.
    pub b: f64,
    pub init: InitKind,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            graph_file: None,
            n: 100,
            degree: 3,
            er_c: 0.0,
            rank: 1,
            b: altmin::instance::EXPERIMENT_B,
            init: InitKind::Uniform,
            seed: 0,
        }
    }
}

/// Random `degree`-regular graph plus Erdos-Renyi edges of expected degree
/// `er_c`, both drawn from streams of `seed`.
pub fn gen_graph(
    n: usize,
    degree: usize,
    er_c: f64,
    seed: u64,
) -> Result<BipartiteGraph, CliError> {
    let g = gen_random_regular_bipartite(n, degree, derive_seed(seed, &[GRAPH]))?;
    if er_c == 0.0 {
        return Ok(g);
    }
    Ok(g.union(&gen_er_edges(n, er_c, derive_seed(seed, &[ER]))?)?)
}

/// Like [`gen_graph`] without extra edges, redrawing until the graph is
/// connected.
pub fn gen_connected_regular(
    n: usize,
    degree: usize,
    seed: u64,
) -> Result<BipartiteGraph, CliError> {
    for attempt in 0..1000u64 {
        let g = gen_random_regular_bipartite(n, degree, derive_seed(seed, &[GRAPH, attempt]))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(CliError::Usage(format!(
        "no connected {degree}-regular graph on {n}+{n} vertices after 1000 draws"
    )))
}

pub fn build_instance(spec: &ProblemSpec, graph: BipartiteGraph) -> Result<Instance, CliError> {
    let seed = derive_seed(spec.seed, &[FACTORS]);
    Ok(match (spec.rank, spec.init) {
        (1, InitKind::Adversarial) => gen_split_rank1_instance(graph, spec.b, seed)?,
        (1, _) => gen_rank1_instance_in_box(graph, spec.b, EXPERIMENT_BOX, seed)?,
        (_, InitKind::Adversarial) => {
            return Err(CliError::Usage(
                "the adversarial initialization is rank 1 only".into(),
            ))
        }
        (r, _) => gen_rank_r_instance(graph, r, seed)?,
    })
}

/// Both algorithms start from the same draw.
pub fn init_spec(spec: &ProblemSpec) -> InitSpec<f64> {
    let seed = derive_seed(spec.seed, &[INIT]);
    match (spec.init, spec.rank) {
        (InitKind::GroundTruth, _) => InitSpec::ground_truth(),
        (InitKind::Adversarial, _) => InitSpec::adversarial_split(spec.b, seed),
        (InitKind::Uniform, 1) => InitSpec::uniform_box(spec.b, seed),
        (InitKind::Uniform, _) => InitSpec::uniform_range(-1.0, 1.0, seed),
    }
}

pub fn start_state(
    inst: &Instance,
    init: &InitSpec<f64>,
    alg: Algorithm,
) -> Result<StartState<f64>, CliError> {
    Ok(match alg {
        Algorithm::Vls => StartState::Factors(make_init(inst, init)?),
        Algorithm::Els => StartState::Messages(make_message_init(inst, init)?),
    })
}

/// Reads the graph file or generates one from the spec.
pub fn build_graph(spec: &ProblemSpec) -> Result<BipartiteGraph, CliError> {
    match &spec.graph_file {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
            Ok(BipartiteGraph::read_edge_list(std::io::BufReader::new(
                file,
            ))?)
        }
        None => gen_graph(spec.n, spec.degree, spec.er_c, spec.seed),
    }
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Instance, CliError> {
    build_instance(spec, build_graph(spec)?)
}

pub fn solve(
    inst: &Instance,
    spec: &ProblemSpec,
    config: &SolveConfig,
) -> Result<Solution<f64>, CliError> {
    let init = init_spec(spec);
    let start = start_state(inst, &init, config.algorithm)?;
    Ok(run(inst, start, config)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub normalized_index: f64,
    pub rms: f64,
}

pub const COMPARE_CSV_HEADER: &str = "algorithm,iteration,normalized_index,rms";

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub vls: Solution<f64>,
    pub els: Solution<f64>,
    /// Common denominator of the normalized index: the larger final
    /// iteration of the two runs (at least 1).
    pub total: usize,
    pub max_degree: usize,
}

impl Comparison {
    /// Normalized index at which each algorithm first recorded an RMS below
    /// `threshold`.
    pub fn first_below(&self, alg: Algorithm, threshold: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == alg && r.rms < threshold)
            .map(|r| r.normalized_index)
    }

    pub fn to_csv(&self) -> String {
        compare_rows_to_csv(&self.rows)
    }
}

/// Runs both algorithms on the same instance and initialization. VLS
/// iteration `t` sits at `t / T`, ELS iteration `t` at `max_degree * t / T`.
pub fn compare(
    inst: &Instance,
    spec: &ProblemSpec,
    config: &SolveConfig,
) -> Result<Comparison, CliError> {
    let vls = solve(
        inst,
        spec,
        &SolveConfig {
            algorithm: Algorithm::Vls,
            ..config.clone()
        },
    )?;
    let els = solve(
        inst,
        spec,
        &SolveConfig {
            algorithm: Algorithm::Els,
            ..config.clone()
        },
    )?;
    let total = vls
        .trace
        .final_iteration
        .max(els.trace.final_iteration)
        .max(1);
    let max_degree = inst.graph().max_degree();
    let mut rows = Vec::new();
    for (alg, sol) in [(Algorithm::Vls, &vls), (Algorithm::Els, &els)] {
        let cost = iteration_cost(alg, inst.graph()) as f64;
        rows.extend(sol.trace.records.iter().map(|r| CompareRow {
            algorithm: alg,
            iteration: r.iteration,
            normalized_index: cost * r.iteration as f64 / total as f64,
            rms: r.rms,
        }));
    }
    Ok(Comparison {
        rows,
        vls,
        els,
        total,
        max_degree,
    })
}

pub fn compare_rows_to_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.algorithm, r.iteration, r.normalized_index, r.rms
        );
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(value: &str, line: usize) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{value}`")))
}

fn csv_body<'a>(
    text: &'a str,
    header: &str,
    width: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(parse_err(1, format!("expected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(parse_err(
                    k + 2,
                    format!("expected {width} fields, found {}", fields.len()),
                ));
            }
            Ok((k + 2, fields))
        })
        .collect()
}

pub fn parse_compare_csv(text: &str) -> Result<Vec<CompareRow>, CliError> {
    csv_body(text, COMPARE_CSV_HEADER, 4)?
        .into_iter()
        .map(|(line, f)| {
            Ok(CompareRow {
                algorithm: field(f[0], line)?,
                iteration: field(f[1], line)?,
                normalized_index: field(f[2], line)?,
                rms: field(f[3], line)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub rank: usize,
    pub n: usize,
    pub planted_degree: usize,
    pub c_grid: Vec<f64>,
    pub trials: usize,
    pub rms_threshold: f64,
    /// 0 evaluates the initial state only.
    pub max_iterations: usize,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(rank: usize, n: usize) -> Self {
        Self {
            rank,
            n,
            planted_degree: rank + 1,
            c_grid: (0..=20).map(f64::from).collect(),
            trials: 200,
            rms_threshold: SolveConfig::DEFAULT_RMS_TOLERANCE,
            max_iterations: SolveConfig::DEFAULT_MAX_ITERATIONS,
            algorithms: vec![Algorithm::Vls, Algorithm::Els],
            seed: 0,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if self.c_grid.is_empty() {
            return bad("c grid must not be empty");
        }
        if self.c_grid.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return bad("c grid values must be finite and non-negative");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if self.rank == 0 || self.n == 0 || self.planted_degree == 0 {
            return bad("rank, n and planted degree must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.rms_threshold > 0.0) {
            return bad("failure threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Success {
        iterations: usize,
    },
    /// Threshold not reached within the iteration cap.
    Timeout,
    /// Non-finite values, RMS above the divergence cap, or a breakdown of a
    /// least-squares solve.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub rank: usize,
    pub n: usize,
    pub c: f64,
    pub trials: usize,
    pub failures: usize,
    pub diverged: usize,
    pub failure_fraction: f64,
    pub mean_success_iters: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str =
    "algorithm,r,n,c,trials,failures,diverged,failure_fraction,mean_success_iters";

/// One trial: fresh graph, instance and initialization. The graph and the
/// instance depend on `(master, c index, trial)` only, so the algorithms see
/// the same problems; the initialization stream also includes the algorithm.
pub fn run_trial(
    config: &SweepConfig,
    alg: Algorithm,
    c_index: usize,
    trial: usize,
) -> Result<TrialOutcome, CliError> {
    let key = derive_seed(config.seed, &[c_index as u64, trial as u64]);
    let graph = gen_graph(config.n, config.planted_degree, config.c_grid[c_index], key)?;
    let inst = if config.rank == 1 {
        gen_rank1_instance_in_box(
            graph,
            altmin::instance::EXPERIMENT_B,
            EXPERIMENT_BOX,
            derive_seed(key, &[FACTORS]),
        )?
    } else {
        gen_rank_r_instance(graph, config.rank, derive_seed(key, &[FACTORS]))?
    };
    let init_seed = derive_seed(key, &[INIT, algorithm_tag(alg)]);
    let init = if config.rank == 1 {
        InitSpec::uniform_box(altmin::instance::EXPERIMENT_B, init_seed)
    } else {
        InitSpec::uniform_range(-1.0, 1.0, init_seed)
    };
    let start = start_state(&inst, &init, alg)?;

    // an infinite threshold accepts any finite initial state
    if config.max_iterations == 0 || config.rms_threshold == f64::INFINITY {
        let state = match &start {
            StartState::Factors(s) => s.clone(),
            StartState::Messages(m) => els_collapse(m, inst.graph())?,
        };
        let rms = metrics::rms(&state, &inst)?;
        return Ok(if !rms.is_finite() {
            TrialOutcome::Diverged
        } else if rms < config.rms_threshold {
            TrialOutcome::Success { iterations: 0 }
        } else {
            TrialOutcome::Timeout
        });
    }

    let solve_config = SolveConfig {
        algorithm: alg,
        max_iterations: config.max_iterations,
        rms_tolerance: config.rms_threshold,
        divergence_cap: SolveConfig::DEFAULT_DIVERGENCE_CAP.max(config.rms_threshold * 2.0),
        seed: init_seed,
        record_every: config.max_iterations.max(1),
    };
    Ok(match run(&inst, start, &solve_config) {
        Ok(sol) => match sol.trace.status {
            Status::Converged => TrialOutcome::Success {
                iterations: sol.trace.final_iteration,
            },
            Status::Diverged => TrialOutcome::Diverged,
            _ => TrialOutcome::Timeout,
        },
        Err(altmin::Error::Vertex { .. }) => TrialOutcome::Diverged,
        Err(e) => return Err(e.into()),
    })
}

/// Runs every `(algorithm, c, trial)` on a pool of `config.workers` threads.
/// Rows come out in `(algorithm, c)` order and do not depend on scheduling.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    config.validate()?;
    let items: Vec<(usize, usize, usize)> = (0..config.algorithms.len())
        .flat_map(|a| {
            (0..config.c_grid.len()).flat_map(move |c| (0..config.trials).map(move |t| (a, c, t)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        items
            .par_iter()
            .map(|&(a, c, t)| run_trial(config, config.algorithms[a], c, t))
            .collect::<Result<_, _>>()
    })?;

    let mut rows = Vec::new();
    for (block, chunk) in outcomes.chunks(config.trials).enumerate() {
        let (a, c) = (block / config.c_grid.len(), block % config.c_grid.len());
        let successes: Vec<usize> = chunk
            .iter()
            .filter_map(|o| match o {
                TrialOutcome::Success { iterations } => Some(*iterations),
                _ => None,
            })
            .collect();
        let diverged = chunk
            .iter()
            .filter(|o| **o == TrialOutcome::Diverged)
            .count();
        let failures = chunk.len() - successes.len();
        rows.push(SweepRow {
            algorithm: config.algorithms[a],
            rank: config.rank,
            n: config.n,
            c: config.c_grid[c],
            trials: config.trials,
            failures,
            diverged,
            failure_fraction: failures as f64 / config.trials as f64,
            mean_success_iters: (!successes.is_empty())
                .then(|| successes.iter().sum::<usize>() as f64 / successes.len() as f64),
        });
    }
    Ok(rows)
}

pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let mean = r
            .mean_success_iters
            .map(|m| m.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.rank,
            r.n,
            r.c,
            r.trials,
            r.failures,
            r.diverged,
            r.failure_fraction,
            mean
        );
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, CliError> {
    csv_body(text, SWEEP_CSV_HEADER, 9)?
        .into_iter()
        .map(|(line, f)| {
            let row = SweepRow {
                algorithm: field(f[0], line)?,
                rank: field(f[1], line)?,
                n: field(f[2], line)?,
                c: field(f[3], line)?,
                trials: field(f[4], line)?,
                failures: field(f[5], line)?,
                diverged: field(f[6], line)?,
                failure_fraction: field(f[7], line)?,
                mean_success_iters: if f[8].is_empty() {
                    None
                } else {
                    Some(field(f[8], line)?)
                },
            };
            if row.failures > row.trials || row.diverged > row.failures {
                return Err(parse_err(line, "inconsistent counts"));
            }
            Ok(row)
        })
        .collect()
}

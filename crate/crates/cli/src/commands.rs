//! Subcommand definitions and handlers. Handlers return the process exit
//! code.

use std::io::Write;
use std::path::{Path, PathBuf};

use altmin::analysis::{diagnose, verify_window, window_product, DiagnosticConfig, ViolationKind};
use altmin::{Algorithm, SolveConfig, Status};
use clap::{Args, Parser, Subcommand};

use crate::experiments::{
    build_graph, build_problem, compare, gen_graph, init_spec, parse_compare_csv, parse_sweep_csv,
    solve, start_state, sweep, sweep_rows_to_csv, CompareRow, InitKind, ProblemSpec, SweepConfig,
    SweepRow,
};
use crate::svg::{LineChart, Series};
use crate::threshold;
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_ITERATION_CAP: i32 = 3;

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Converged | Status::Running => EXIT_OK,
        Status::Diverged => EXIT_DIVERGED,
        Status::IterationCap => EXIT_ITERATION_CAP,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "altmin",
    version,
    about = "Alternating least-squares matrix completion experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a regular bipartite graph, optionally with extra random edges.
    GenGraph(GenGraphArgs),
    /// Solve one instance and write the RMS trace.
    Run(RunArgs),
    /// Run VLS and ELS on the same instance and initialization.
    Compare(CompareArgs),
    /// Failure fraction against the density of extra random edges.
    Sweep(SweepArgs),
    /// Read a sweep CSV and locate the 0.5 crossing of the failure fraction.
    EstimateThreshold(ThresholdArgs),
    /// Rank-1 run with transition-matrix diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub degree: usize,
    /// Expected degree of the added Erdos-Renyi edges.
    #[arg(long, default_value_t = 0.0)]
    pub er_c: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge-list file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Edge-list file; replaces --n/--degree/--er-c.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.0)]
    pub er_c: f64,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Rank-1 entry bound: factors in [b, 1/b] within [0.01, 0.99], init in [b, 1/b].
    #[arg(long, default_value_t = altmin::instance::EXPERIMENT_B)]
    pub b: f64,
    /// uniform, adversarial or ground-truth.
    #[arg(long, default_value = "uniform")]
    pub init: InitKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ProblemArgs {
    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            graph_file: self.graph.clone(),
            n: self.n,
            degree: self.degree,
            er_c: self.er_c,
            rank: self.rank,
            b: self.b,
            init: self.init,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = SolveConfig::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolveConfig::DEFAULT_RMS_TOLERANCE)]
    pub tol: f64,
    /// RMS above this counts as divergence.
    #[arg(long, default_value_t = SolveConfig::DEFAULT_DIVERGENCE_CAP)]
    pub cap: f64,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

impl SolveArgs {
    pub fn config(&self, algorithm: Algorithm, seed: u64) -> SolveConfig {
        SolveConfig {
            algorithm,
            max_iterations: self.max_iter,
            rms_tolerance: self.tol,
            divergence_cap: self.cap,
            seed,
            record_every: self.record_every,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct RunArgs {
    #[arg(long, default_value = "vls")]
    pub alg: Algorithm,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Trace CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Re-plot an existing comparison CSV instead of solving.
    #[arg(long)]
    pub from_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Degree of the planted regular graph; rank + 1 when absent.
    #[arg(long)]
    pub planted_degree: Option<usize>,
    /// Comma-separated values or start:stop:step.
    #[arg(long, default_value = "0:20:1")]
    pub c_grid: String,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// A trial fails unless the RMS drops below this.
    #[arg(long, default_value_t = SolveConfig::DEFAULT_RMS_TOLERANCE)]
    pub threshold: f64,
    #[arg(long, default_value_t = SolveConfig::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    #[arg(long, default_value = "vls,els")]
    pub algs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ThresholdArgs {
    /// Sweep CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DiagnoseArgs {
    #[arg(long, default_value = "vls")]
    pub alg: Algorithm,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of transition matrices to extract.
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Usage(format!("cannot write to standard output: {e}")))
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid grid `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(num).collect(),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

pub fn parse_algorithms(spec: &str) -> Result<Vec<Algorithm>, CliError> {
    let mut out: Vec<Algorithm> = Vec::new();
    for name in spec.split(',') {
        let alg: Algorithm = name.trim().parse()?;
        if !out.contains(&alg) {
            out.push(alg);
        }
    }
    Ok(out)
}

pub fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::GenGraph(a) => cmd_gen_graph(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::EstimateThreshold(a) => cmd_estimate_threshold(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    }
}

pub fn cmd_gen_graph(args: &GenGraphArgs) -> Result<i32, CliError> {
    let g = gen_graph(args.n, args.degree, args.er_c, args.seed)?;
    write_output(args.out.as_deref(), &g.to_edge_list_string())?;
    let diameter = g
        .diameter()
        .map(|d| d.to_string())
        .unwrap_or_else(|_| "inf".into());
    eprintln!(
        "n {} edges {} max_degree {} connected {} diameter {}",
        g.n_rows(),
        g.n_edges(),
        g.max_degree(),
        g.is_connected(),
        diameter
    );
    Ok(EXIT_OK)
}

pub fn trace_chart(title: &str, series: Vec<Series>, x_label: &str) -> LineChart {
    LineChart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "rms".into(),
        log_y: true,
        series,
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let spec = args.problem.spec();
    let inst = build_problem(&spec)?;
    let config = args.solve.config(args.alg, spec.seed);
    let sol = solve(&inst, &spec, &config)?;
    let trace = &sol.trace;
    write_output(args.out.as_deref(), &trace.to_csv())?;
    if let Some(path) = &args.svg {
        let points = trace
            .records
            .iter()
            .map(|r| (r.iteration as f64, r.rms))
            .collect();
        let chart = trace_chart(
            &format!("{} on n = {}", args.alg, inst.n()),
            vec![Series {
                name: args.alg.to_string(),
                points,
            }],
            "iteration",
        );
        write_output(Some(path), &chart.render())?;
    }
    eprintln!(
        "{} status {} iterations {} rms {:e}",
        args.alg,
        trace.status,
        trace.final_iteration,
        trace.final_rms()
    );
    Ok(exit_code(trace.status))
}

pub fn compare_chart(rows: &[CompareRow]) -> LineChart {
    let series = [Algorithm::Vls, Algorithm::Els]
        .into_iter()
        .map(|alg| Series {
            name: alg.to_string(),
            points: rows
                .iter()
                .filter(|r| r.algorithm == alg)
                .map(|r| (r.normalized_index, r.rms))
                .collect(),
        })
        .collect();
    trace_chart(
        "RMS against normalized iterations",
        series,
        "normalized iteration index",
    )
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32, CliError> {
    if let Some(path) = &args.from_csv {
        let rows = parse_compare_csv(&read_input(path)?)?;
        if let Some(svg) = &args.svg {
            write_output(Some(svg), &compare_chart(&rows).render())?;
        }
        return Ok(EXIT_OK);
    }
    let spec = args.problem.spec();
    let inst = build_problem(&spec)?;
    let cmp = compare(&inst, &spec, &args.solve.config(Algorithm::Vls, spec.seed))?;
    write_output(args.out.as_deref(), &cmp.to_csv())?;
    if let Some(svg) = &args.svg {
        write_output(Some(svg), &compare_chart(&cmp.rows).render())?;
    }
    for (alg, sol) in [(Algorithm::Vls, &cmp.vls), (Algorithm::Els, &cmp.els)] {
        let first = cmp
            .first_below(alg, args.solve.tol)
            .map(|x| x.to_string())
            .unwrap_or_else(|| "-".into());
        eprintln!(
            "{alg} status {} iterations {} index_at_tol {first}",
            sol.trace.status, sol.trace.final_iteration
        );
    }
    eprintln!("T {} max_degree {}", cmp.total, cmp.max_degree);
    Ok(exit_code(cmp.vls.trace.status).max(exit_code(cmp.els.trace.status)))
}

pub fn sweep_config(args: &SweepArgs) -> Result<SweepConfig, CliError> {
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let config = SweepConfig {
        rank: args.rank,
        n: args.n,
        planted_degree: args.planted_degree.unwrap_or(args.rank + 1),
        c_grid: parse_grid(&args.c_grid)?,
        trials: args.trials,
        rms_threshold: args.threshold,
        max_iterations: args.max_iter,
        algorithms: parse_algorithms(&args.algs)?,
        seed: args.seed,
        workers,
    };
    config.validate()?;
    Ok(config)
}

pub fn sweep_chart(rows: &[SweepRow]) -> LineChart {
    let mut algs: Vec<Algorithm> = Vec::new();
    for r in rows {
        if !algs.contains(&r.algorithm) {
            algs.push(r.algorithm);
        }
    }
    LineChart {
        title: "failure fraction".into(),
        x_label: "c".into(),
        y_label: "fraction of failures".into(),
        log_y: false,
        series: algs
            .into_iter()
            .map(|alg| Series {
                name: alg.to_string(),
                points: rows
                    .iter()
                    .filter(|r| r.algorithm == alg)
                    .map(|r| (r.c, r.failure_fraction))
                    .collect(),
            })
            .collect(),
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let config = sweep_config(args)?;
    let rows = sweep(&config)?;
    write_output(args.out.as_deref(), &sweep_rows_to_csv(&rows))?;
    if let Some(svg) = &args.svg {
        write_output(Some(svg), &sweep_chart(&rows).render())?;
    }
    Ok(EXIT_OK)
}

pub const THRESHOLD_CSV_HEADER: &str = "algorithm,r,n,c_star,ci_low,ci_high,no_crossing_replicates";

pub fn cmd_estimate_threshold(args: &ThresholdArgs) -> Result<i32, CliError> {
    let rows = parse_sweep_csv(&read_input(&args.input)?)?;
    let mut groups: Vec<(Algorithm, usize, usize)> = Vec::new();
    for r in &rows {
        let key = (r.algorithm, r.rank, r.n);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut out = format!("{THRESHOLD_CSV_HEADER}\n");
    for (alg, rank, n) in groups {
        let points: Vec<(f64, usize, usize)> = rows
            .iter()
            .filter(|r| (r.algorithm, r.rank, r.n) == (alg, rank, n))
            .map(|r| (r.c, r.failures, r.trials))
            .collect();
        let est = threshold::estimate(&points, args.replicates, args.confidence, args.seed)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{alg},{rank},{n},{},{},{},{}\n",
            opt(est.estimate),
            opt(est.interval.map(|i| i.0)),
            opt(est.interval.map(|i| i.1)),
            est.no_crossing
        ));
        if est.estimate.is_none() {
            eprintln!("{alg} r={rank} n={n}: no crossing");
        }
    }
    write_output(args.out.as_deref(), &out)?;
    Ok(EXIT_OK)
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<i32, CliError> {
    let spec = args.problem.spec();
    if spec.rank != 1 {
        return Err(CliError::Usage(format!(
            "diagnose needs rank 1, got {}",
            spec.rank
        )));
    }
    let graph = build_graph(&spec)?;
    let diameter = graph.diameter().ok();
    let inst = crate::experiments::build_instance(&spec, graph)?;
    let start = start_state(&inst, &init_spec(&spec), args.alg)?;
    let keep = diameter.filter(|&d| d <= args.iterations).unwrap_or(0);
    let config = DiagnosticConfig {
        algorithm: args.alg,
        iterations: args.iterations,
        b: spec.b,
        keep_matrices: keep,
    };
    let report = diagnose(&inst, start, &config)?;
    write_output(args.out.as_deref(), &report.to_csv())?;

    let kinds = [
        (ViolationKind::RowSum, "row_sum"),
        (ViolationKind::Consistency, "consistency"),
        (ViolationKind::IterateBound, "iterate_bound"),
        (ViolationKind::EntryBound, "entry_bound"),
        (ViolationKind::Envelope, "envelope"),
    ];
    let counts: Vec<String> = kinds
        .iter()
        .map(|(k, name)| format!("{name} {}", report.count(*k)))
        .collect();
    eprintln!(
        "violations {} ({})",
        report.violations.len(),
        counts.join(", ")
    );
    eprintln!(
        "z {:e} diameter {} contraction_exponent {}",
        report.z,
        report
            .diameter
            .map(|d| d.to_string())
            .unwrap_or_else(|| "inf".into()),
        report
            .contraction_exponent
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".into())
    );
    if keep > 0 && report.matrices.len() == keep {
        let q = window_product(&report.matrices, keep)?;
        let w = verify_window(&q, report.z, keep);
        eprintln!(
            "window min_entry {:e} strictly_positive {}",
            w.min_entry, w.strictly_positive
        );
    }
    let rms = altmin::metrics::rms(&report.final_state, &inst)?;
    eprintln!("final rms {rms:e}");
    Ok(EXIT_OK)
}

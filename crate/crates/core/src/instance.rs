//! Ground-truth factors, observed entries and solver initializations.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{numbered_content_lines, BipartiteGraph};
use crate::scalar::Scalar;
use crate::solver::{FactorState, MessageState};

/// Sampling box used for the rank-1 experiments: entries uniform on
/// `[0.01, 0.99]`.
pub const EXPERIMENT_BOX: (f64, f64) = (0.01, 0.99);

/// Entry bound `b` matching [`EXPERIMENT_BOX`].
pub const EXPERIMENT_B: f64 = 0.01;

/// The read-only part of an instance a solver is allowed to see: the
/// observation pattern and the revealed values, indexed by edge id.
#[derive(Debug, Clone, Copy)]
pub struct ObservedView<'a, T> {
    pub graph: &'a BipartiteGraph,
    pub values: &'a [T],
    pub rank: usize,
}

impl<'a, T: Scalar> ObservedView<'a, T> {
    pub fn new(graph: &'a BipartiteGraph, values: &'a [T], rank: usize) -> Result<Self> {
        if values.len() != graph.n_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} observed values for {} edges",
                values.len(),
                graph.n_edges()
            )));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        Ok(Self {
            graph,
            values,
            rank,
        })
    }
}

/// A planted low-rank completion problem `M = alpha * beta^T` observed on the
/// edges of a square bipartite graph.
///
/// The factors are kept for evaluation and diagnostics; solvers only receive
/// [`Instance::view`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    n: usize,
    rank: usize,
    alpha: Vec<T>,
    beta: Vec<T>,
    graph: BipartiteGraph,
    observed: Vec<T>,
    b: Option<T>,
    seed: u64,
}

impl<T: Scalar> Instance<T> {
    /// Builds an instance from row-major `n x rank` factors and fills the
    /// observed entries from the graph.
    pub fn from_factors(
        graph: BipartiteGraph,
        rank: usize,
        alpha: Vec<T>,
        beta: Vec<T>,
        b: Option<T>,
        seed: u64,
    ) -> Result<Self> {
        let n = graph.n_rows();
        if graph.n_cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "instances need a square graph, got {}x{}",
                n,
                graph.n_cols()
            )));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if alpha.len() != n * rank || beta.len() != n * rank {
            return Err(Error::DimensionMismatch(format!(
                "factors must be {n}x{rank}, got {} and {} entries",
                alpha.len(),
                beta.len()
            )));
        }
        if let Some(b) = b {
            if !(b > T::zero() && b < T::one()) {
                return Err(Error::InvalidArgument(format!(
                    "b must lie in (0, 1), got {b}"
                )));
            }
        }
        let observed = graph
            .edges()
            .iter()
            .map(|&(i, j)| {
                dot(
                    &alpha[i * rank..(i + 1) * rank],
                    &beta[j * rank..(j + 1) * rank],
                )
            })
            .collect();
        Ok(Self {
            n,
            rank,
            alpha,
            beta,
            graph,
            observed,
            b,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    /// Row-major `n x rank` left factor.
    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn alpha_row(&self, i: usize) -> &[T] {
        &self.alpha[i * self.rank..(i + 1) * self.rank]
    }

    pub fn beta_row(&self, j: usize) -> &[T] {
        &self.beta[j * self.rank..(j + 1) * self.rank]
    }

    /// Observed values indexed by edge id.
    pub fn observed(&self) -> &[T] {
        &self.observed
    }

    pub fn observed_at(&self, row: usize, col: usize) -> Option<T> {
        self.graph.edge_id(row, col).map(|e| self.observed[e])
    }

    /// Full-matrix entry `alpha_i^T beta_j`.
    pub fn entry(&self, row: usize, col: usize) -> T {
        dot(self.alpha_row(row), self.beta_row(col))
    }

    pub fn b(&self) -> Option<T> {
        self.b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn view(&self) -> ObservedView<'_, T> {
        ObservedView {
            graph: &self.graph,
            values: &self.observed,
            rank: self.rank,
        }
    }

    /// The factors themselves as a solver state; a fixed point of both
    /// algorithms.
    pub fn ground_truth(&self) -> FactorState<T> {
        FactorState::new(self.n, self.rank, self.alpha.clone(), self.beta.clone())
            .expect("factor dimensions already validated")
    }

    /// Plain-text form: header `n r b seed` (`b` is `-` when absent), `n`
    /// rows of alpha, `n` rows of beta, the edge count, then `i j value` per
    /// edge. Floats use the shortest round-trip representation.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let b = self.b.map_or_else(|| "-".to_string(), |b| b.to_string());
        writeln!(out, "{} {} {} {}", self.n, self.rank, b, self.seed)?;
        write_rows(&mut out, &self.alpha, self.rank)?;
        write_rows(&mut out, &self.beta, self.rank)?;
        writeln!(out, "{}", self.graph.n_edges())?;
        for (&(i, j), value) in self.graph.edges().iter().zip(&self.observed) {
            writeln!(out, "{i} {j} {value}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = numbered_content_lines(input);
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            lines.next().transpose()?.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            })
        };

        let (line_no, header) = next_line("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: "header must be `n r b seed`".into(),
            });
        }
        let n: usize = parse_field(fields[0], line_no)?;
        let rank: usize = parse_field(fields[1], line_no)?;
        let b: Option<T> = match fields[2] {
            "-" => None,
            s => Some(parse_field(s, line_no)?),
        };
        let seed: u64 = parse_field(fields[3], line_no)?;

        let mut factors = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut values = Vec::with_capacity(n * rank);
            for _ in 0..n {
                let (line_no, line) = next_line("factor row")?;
                let row = parse_row::<T>(&line, line_no)?;
                if row.len() != rank {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {rank} values, found {}", row.len()),
                    });
                }
                values.extend(row);
            }
            factors.push(values);
        }
        let beta = factors.pop().expect("two factors");
        let alpha = factors.pop().expect("two factors");

        let (line_no, count_line) = next_line("edge count")?;
        let n_edges: usize = parse_field(count_line.trim(), line_no)?;
        let mut edges = Vec::with_capacity(n_edges);
        let mut values = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (line_no, line) = next_line("edge")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "edge line must be `i j value`".into(),
                });
            }
            edges.push((
                parse_field(parts[0], line_no)?,
                parse_field(parts[1], line_no)?,
            ));
            values.push((line_no, parse_field::<T>(parts[2], line_no)?));
        }
        let graph = BipartiteGraph::from_edges(n, n, edges.iter().copied())?;
        if graph.n_edges() != n_edges {
            return Err(Error::Parse {
                line: 0,
                message: "duplicate edges".into(),
            });
        }
        let inst = Self::from_factors(graph, rank, alpha, beta, b, seed)?;
        for (&(i, j), &(line_no, value)) in edges.iter().zip(&values) {
            if inst.observed_at(i, j) != Some(value) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("observed value {value} disagrees with the factors"),
                });
            }
        }
        Ok(inst)
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}

pub(crate) fn write_rows<W: Write, T: Scalar>(
    out: &mut W,
    values: &[T],
    rank: usize,
) -> Result<()> {
    for row in values.chunks(rank) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub(crate) fn parse_field<F: std::str::FromStr>(s: &str, line: usize) -> Result<F> {
    s.parse::<F>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{s}`"),
    })
}

pub(crate) fn parse_row<T: Scalar>(line: &str, line_no: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| parse_field(t, line_no))
        .collect()
}

fn uniform_vec<T: Scalar>(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<T> {
    (0..len).map(|_| T::of(rng.gen_range(lo..=hi))).collect()
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "b must lie in (0, 1), got {b}"
        )))
    }
}

/// Rank-1 instance with factors uniform on `[b, 1/b]` intersected with
/// [`EXPERIMENT_BOX`].
pub fn gen_rank1_instance<T: Scalar>(
    graph: BipartiteGraph,
    b: f64,
    seed: u64,
) -> Result<Instance<T>> {
    gen_rank1_instance_in_box(graph, b, EXPERIMENT_BOX, seed)
}

/// Rank-1 instance with factors uniform on `[b, 1/b] ∩ [lo, hi]`. The
/// hypothesis bound `b` and the sampling box are independent knobs.
pub fn gen_rank1_instance_in_box<T: Scalar>(
    graph: BipartiteGraph,
    b: f64,
    sampling_box: (f64, f64),
    seed: u64,
) -> Result<Instance<T>> {
    check_b(b)?;
    let lo = sampling_box.0.max(b);
    let hi = sampling_box.1.min(1.0 / b);
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "sampling box [{}, {}] does not meet [b, 1/b] for b = {b}",
            sampling_box.0, sampling_box.1
        )));
    }
    let n = graph.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = uniform_vec(&mut rng, n, lo, hi);
    let beta = uniform_vec(&mut rng, n, lo, hi);
    Instance::from_factors(graph, 1, alpha, beta, Some(T::of(b)), seed)
}

/// Rank-`r` instance with every factor entry uniform on `[-1, 1]`.
pub fn gen_rank_r_instance<T: Scalar>(
    graph: BipartiteGraph,
    rank: usize,
    seed: u64,
) -> Result<Instance<T>> {
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let n = graph.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = uniform_vec(&mut rng, n * rank, -1.0, 1.0);
    let beta = uniform_vec(&mut rng, n * rank, -1.0, 1.0);
    Instance::from_factors(graph, rank, alpha, beta, None, seed)
}

/// Two-level vector: the first `n / 2` entries (rounded down) take `first`,
/// the rest `second`.
pub fn split_vector<T: Scalar>(n: usize, first: T, second: T) -> Vec<T> {
    (0..n)
        .map(|i| if i < n / 2 { first } else { second })
        .collect()
}

/// Rank-1 instance whose left factor is the two-level vector
/// `(b, .., b, 1/b, .., 1/b)`; the right factor is uniform on `[b, 1/b]`.
/// Paired with [`InitMode::AdversarialSplit`] this starts the solver as far
/// from the truth as the entry bounds allow.
pub fn gen_split_rank1_instance<T: Scalar>(
    graph: BipartiteGraph,
    b: f64,
    seed: u64,
) -> Result<Instance<T>> {
    check_b(b)?;
    let n = graph.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = split_vector(n, T::of(b), T::of(1.0 / b));
    let beta = uniform_vec(&mut rng, n, b, 1.0 / b);
    Instance::from_factors(graph, 1, alpha, beta, Some(T::of(b)), seed)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode<T> {
    /// Every entry i.i.d. uniform on `[lo, hi]`.
    UniformBox { lo: f64, hi: f64 },
    /// Rank 1 only: `x_i = 1/b` for the first half of the rows and `b` for
    /// the rest. The column side, which the two-level pattern leaves open, is
    /// drawn uniformly from `[b, 1/b]`.
    AdversarialSplit { b: f64 },
    /// Copy of the planted factors.
    GroundTruth,
    /// Caller-supplied iterates, optionally checked against `[b, 1/b]`.
    Custom {
        state: FactorState<T>,
        bound: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec<T> {
    pub mode: InitMode<T>,
    pub seed: u64,
}

impl<T> InitSpec<T> {
    /// Entries uniform on `[b, 1/b]`.
    pub fn uniform_box(b: f64, seed: u64) -> Self {
        Self {
            mode: InitMode::UniformBox { lo: b, hi: 1.0 / b },
            seed,
        }
    }

    pub fn uniform_range(lo: f64, hi: f64, seed: u64) -> Self {
        Self {
            mode: InitMode::UniformBox { lo, hi },
            seed,
        }
    }

    pub fn adversarial_split(b: f64, seed: u64) -> Self {
        Self {
            mode: InitMode::AdversarialSplit { b },
            seed,
        }
    }

    pub fn ground_truth() -> Self {
        Self {
            mode: InitMode::GroundTruth,
            seed: 0,
        }
    }
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "invalid sampling range [{lo}, {hi}]"
        )))
    }
}

fn check_custom<T: Scalar>(
    inst: &Instance<T>,
    state: &FactorState<T>,
    bound: Option<f64>,
) -> Result<()> {
    if state.n() != inst.n() || state.rank() != inst.rank() {
        return Err(Error::DimensionMismatch(format!(
            "custom state is {}x{}, instance is {}x{}",
            state.n(),
            state.rank(),
            inst.n(),
            inst.rank()
        )));
    }
    let values = state.x().iter().chain(state.y());
    if let Some(b) = bound {
        check_b(b)?;
        let (lo, hi) = (T::of(b), T::of(1.0 / b));
        if let Some(v) = values.clone().find(|&&v| !(v >= lo && v <= hi)) {
            return Err(Error::InvalidArgument(format!(
                "custom initial value {v} outside [{b}, {}]",
                1.0 / b
            )));
        }
    }
    if values.clone().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "custom initial values must be finite".into(),
        ));
    }
    Ok(())
}

/// Initial vertex iterates for VLS.
pub fn make_init<T: Scalar>(inst: &Instance<T>, spec: &InitSpec<T>) -> Result<FactorState<T>> {
    let (n, r) = (inst.n(), inst.rank());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (x, y) = match &spec.mode {
        InitMode::UniformBox { lo, hi } => {
            check_range(*lo, *hi)?;
            let x = uniform_vec(&mut rng, n * r, *lo, *hi);
            let y = uniform_vec(&mut rng, n * r, *lo, *hi);
            (x, y)
        }
        InitMode::AdversarialSplit { b } => {
            adversarial_precheck(inst, *b)?;
            let x = split_vector(n, T::of(1.0 / b), T::of(*b));
            let y = uniform_vec(&mut rng, n, *b, 1.0 / b);
            (x, y)
        }
        InitMode::GroundTruth => return Ok(inst.ground_truth()),
        InitMode::Custom { state, bound } => {
            check_custom(inst, state, *bound)?;
            let mut state = state.clone();
            state.iteration = 0;
            return Ok(state);
        }
    };
    FactorState::new(n, r, x, y)
}

fn adversarial_precheck<T: Scalar>(inst: &Instance<T>, b: f64) -> Result<()> {
    if inst.rank() != 1 {
        return Err(Error::InvalidArgument(format!(
            "adversarial-split initialization is rank 1 only, instance has rank {}",
            inst.rank()
        )));
    }
    check_b(b)
}

/// Initial edge messages for ELS. Every vertex must have at least one edge.
///
/// Random modes draw every message independently; the adversarial split
/// assigns each outgoing row message the row's two-level value.
pub fn make_message_init<T: Scalar>(
    inst: &Instance<T>,
    spec: &InitSpec<T>,
) -> Result<MessageState<T>> {
    let g = inst.graph();
    if let Some((v, _)) = g.first_vertex_below_degree(1) {
        return Err(Error::Structural(format!(
            "{} vertex {} has no edges, so it carries no messages",
            v.side, v.index
        )));
    }
    let (m, r) = (g.n_edges(), inst.rank());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.mode {
        InitMode::UniformBox { lo, hi } => {
            check_range(*lo, *hi)?;
            let x = uniform_vec(&mut rng, m * r, *lo, *hi);
            let y = uniform_vec(&mut rng, m * r, *lo, *hi);
            MessageState::new(m, r, x, y)
        }
        InitMode::AdversarialSplit { b } => {
            adversarial_precheck(inst, *b)?;
            let split = split_vector(inst.n(), T::of(1.0 / b), T::of(*b));
            let x = g.edges().iter().map(|&(i, _)| split[i]).collect();
            let y = uniform_vec(&mut rng, m, *b, 1.0 / b);
            MessageState::new(m, 1, x, y)
        }
        InitMode::GroundTruth => Ok(MessageState::replicate(g, &inst.ground_truth())),
        InitMode::Custom { state, bound } => {
            check_custom(inst, state, *bound)?;
            Ok(MessageState::replicate(g, state))
        }
    }
}

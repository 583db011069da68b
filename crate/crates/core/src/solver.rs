//! Vertex least squares (VLS) and edge least squares (ELS) iterations.
//!
//! One iteration always updates every row-side quantity from the current
//! column-side values first, then every column-side quantity from the fresh
//! row-side values. The two phases are never interleaved.
//!
//! ELS messages are stored by edge id: `x_msgs[e]` is `x_{i -> j}` and
//! `y_msgs[e]` is `y_{j -> i}` for `e = (i, j)`. The message `x_{i -> j}`
//! is fitted to the observations `M_ik` of the *other* neighbors `k != j`,
//! each paired with its own incoming message `y_{k -> i}`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result, Side};
use crate::graph::BipartiteGraph;
use crate::instance::{dot, parse_field, write_rows, Instance, ObservedView};
use crate::linalg::{solve_psd_min_norm_into, symmetric_eigen_scratch};
use crate::metrics;
use crate::scalar::Scalar;

/// VLS iterates: one length-`rank` vector per row vertex and per column
/// vertex, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState<T> {
    n: usize,
    rank: usize,
    x: Vec<T>,
    y: Vec<T>,
    pub iteration: usize,
}

impl<T: Scalar> FactorState<T> {
    pub fn new(n: usize, rank: usize, x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if x.len() != n * rank || y.len() != n * rank {
            return Err(Error::DimensionMismatch(format!(
                "state must be {n}x{rank}, got {} and {} entries",
                x.len(),
                y.len()
            )));
        }
        Ok(Self {
            n,
            rank,
            x,
            y,
            iteration: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x_mut(&mut self) -> &mut [T] {
        &mut self.x
    }

    pub fn y_mut(&mut self) -> &mut [T] {
        &mut self.y
    }

    pub fn x_row(&self, i: usize) -> &[T] {
        &self.x[i * self.rank..(i + 1) * self.rank]
    }

    pub fn y_row(&self, j: usize) -> &[T] {
        &self.y[j * self.rank..(j + 1) * self.rank]
    }

    /// Completed entry `x_i^T y_j`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        dot(self.x_row(i), self.y_row(j))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Header `n r iteration` followed by the factor rows in the same layout
    /// as the instance format.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n, self.rank, self.iteration)?;
        write_rows(&mut out, &self.x, self.rank)?;
        write_rows(&mut out, &self.y, self.rank)?;
        Ok(())
    }
}

/// ELS iterates: one length-`rank` message per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState<T> {
    n_edges: usize,
    rank: usize,
    x_msgs: Vec<T>,
    y_msgs: Vec<T>,
    pub iteration: usize,
}

impl<T: Scalar> MessageState<T> {
    pub fn new(n_edges: usize, rank: usize, x_msgs: Vec<T>, y_msgs: Vec<T>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if x_msgs.len() != n_edges * rank || y_msgs.len() != n_edges * rank {
            return Err(Error::DimensionMismatch(format!(
                "messages must be {n_edges}x{rank}, got {} and {} entries",
                x_msgs.len(),
                y_msgs.len()
            )));
        }
        Ok(Self {
            n_edges,
            rank,
            x_msgs,
            y_msgs,
            iteration: 0,
        })
    }

    /// Every outgoing message of a vertex set to that vertex's value.
    pub fn replicate(graph: &BipartiteGraph, state: &FactorState<T>) -> Self {
        let r = state.rank();
        let mut x_msgs = Vec::with_capacity(graph.n_edges() * r);
        let mut y_msgs = Vec::with_capacity(graph.n_edges() * r);
        for &(i, j) in graph.edges() {
            x_msgs.extend_from_slice(state.x_row(i));
            y_msgs.extend_from_slice(state.y_row(j));
        }
        Self {
            n_edges: graph.n_edges(),
            rank: r,
            x_msgs,
            y_msgs,
            iteration: state.iteration,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn x_msgs(&self) -> &[T] {
        &self.x_msgs
    }

    pub fn y_msgs(&self) -> &[T] {
        &self.y_msgs
    }

    pub fn x_msgs_mut(&mut self) -> &mut [T] {
        &mut self.x_msgs
    }

    pub fn y_msgs_mut(&mut self) -> &mut [T] {
        &mut self.y_msgs
    }

    /// `x_{i -> j}` for edge id `e = (i, j)`.
    pub fn x_msg(&self, e: usize) -> &[T] {
        &self.x_msgs[e * self.rank..(e + 1) * self.rank]
    }

    /// `y_{j -> i}` for edge id `e = (i, j)`.
    pub fn y_msg(&self, e: usize) -> &[T] {
        &self.y_msgs[e * self.rank..(e + 1) * self.rank]
    }

    pub fn is_finite(&self) -> bool {
        self.x_msgs
            .iter()
            .chain(&self.y_msgs)
            .all(|v| v.is_finite())
    }
}

/// Accumulates `sum (x^T y_k - m_k)^2` and solves for its minimizer.
///
/// Rank 1 uses the closed form `sum m_k y_k / sum y_k^2`; higher ranks solve
/// the normal equations `(sum y_k y_k^T) x = sum m_k y_k` for the minimal-norm
/// solution.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    rank: usize,
    gram: Vec<T>,
    rhs: Vec<T>,
    scratch: Vec<T>,
    count: usize,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            gram: vec![T::zero(); rank * rank],
            rhs: vec![T::zero(); rank],
            scratch: vec![T::zero(); rank * rank],
            count: 0,
        }
    }

    pub fn reset(&mut self) {
        self.gram.iter_mut().for_each(|v| *v = T::zero());
        self.rhs.iter_mut().for_each(|v| *v = T::zero());
        self.count = 0;
    }

    pub fn add(&mut self, y: &[T], value: T) {
        let r = self.rank;
        debug_assert_eq!(y.len(), r);
        for a in 0..r {
            self.rhs[a] += value * y[a];
            for b in a..r {
                self.gram[a * r + b] += y[a] * y[b];
            }
        }
        self.count += 1;
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn solve_into(&mut self, out: &mut [T]) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyTargets);
        }
        if self.rank == 1 {
            let den = self.gram[0];
            if den == T::zero() {
                return Err(Error::ZeroDenominator);
            }
            out[0] = self.rhs[0] / den;
            return Ok(());
        }
        self.solve_normal_equations_into(out)
    }

    /// Normal-equation path regardless of rank.
    pub fn solve_normal_equations_into(&mut self, out: &mut [T]) -> Result<()> {
        if self.count == 0 {
            return Err(Error::EmptyTargets);
        }
        let r = self.rank;
        for a in 0..r {
            for b in 0..a {
                self.gram[a * r + b] = self.gram[b * r + a];
            }
        }
        symmetric_eigen_scratch(&mut self.gram, &mut self.scratch, r);
        solve_psd_min_norm_into(&self.gram, &self.scratch, &self.rhs, r, out);
        Ok(())
    }
}

fn targets_rank<'a, T: Scalar + 'a>(targets: &[(&'a [T], T)]) -> Result<usize> {
    let first = targets.first().ok_or(Error::EmptyTargets)?;
    let r = first.0.len();
    if r == 0 || targets.iter().any(|(y, _)| y.len() != r) {
        return Err(Error::DimensionMismatch(
            "target vectors must share a positive length".into(),
        ));
    }
    Ok(r)
}

/// Minimizer of `sum (x^T y_k - m_k)^2` over the given `(y_k, m_k)` pairs.
pub fn vls_vertex_solve<T: Scalar>(targets: &[(&[T], T)]) -> Result<Vec<T>> {
    let r = targets_rank(targets)?;
    let mut ls = LeastSquares::new(r);
    for &(y, m) in targets {
        ls.add(y, m);
    }
    let mut out = vec![T::zero(); r];
    ls.solve_into(&mut out)?;
    Ok(out)
}

/// Same contract as [`vls_vertex_solve`] but always through the normal
/// equations, including rank 1.
pub fn vertex_solve_normal_equations<T: Scalar>(targets: &[(&[T], T)]) -> Result<Vec<T>> {
    let r = targets_rank(targets)?;
    let mut ls = LeastSquares::new(r);
    for &(y, m) in targets {
        ls.add(y, m);
    }
    let mut out = vec![T::zero(); r];
    ls.solve_normal_equations_into(&mut out)?;
    Ok(out)
}

/// Least-squares message update; the caller passes the targets of every
/// neighbor except the one the message is addressed to.
pub fn els_edge_solve<T: Scalar>(targets: &[(&[T], T)]) -> Result<Vec<T>> {
    vls_vertex_solve(targets)
}

fn check_factor_dims<T: Scalar>(state: &FactorState<T>, view: &ObservedView<'_, T>) -> Result<()> {
    let g = view.graph;
    if state.rank() != view.rank || state.n() != g.n_rows() || state.n() != g.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, problem is {}x{} with rank {}",
            state.n(),
            state.rank(),
            g.n_rows(),
            g.n_cols(),
            view.rank
        )));
    }
    Ok(())
}

fn check_message_dims<T: Scalar>(
    state: &MessageState<T>,
    view: &ObservedView<'_, T>,
) -> Result<()> {
    if state.rank() != view.rank || state.n_edges() != view.graph.n_edges() {
        return Err(Error::DimensionMismatch(format!(
            "{} messages of rank {} for {} edges of rank {}",
            state.n_edges(),
            state.rank(),
            view.graph.n_edges(),
            view.rank
        )));
    }
    Ok(())
}

fn vertex_error(side: Side, index: usize, source: Error) -> Error {
    Error::Vertex {
        side,
        index,
        source: Box::new(source),
    }
}

/// One VLS iteration in place. Vertices without edges keep their value.
pub fn vls_iterate_in_place<T: Scalar>(
    state: &mut FactorState<T>,
    view: &ObservedView<'_, T>,
    ls: &mut LeastSquares<T>,
) -> Result<()> {
    check_factor_dims(state, view)?;
    let g = view.graph;
    let r = state.rank;
    let mut out = vec![T::zero(); r];

    for i in 0..g.n_rows() {
        if g.row_degree(i) == 0 {
            continue;
        }
        ls.reset();
        for (&j, e) in g.row_neighbors(i).iter().zip(g.row_edge_ids(i)) {
            ls.add(&state.y[j * r..(j + 1) * r], view.values[e]);
        }
        ls.solve_into(&mut out)
            .map_err(|e| vertex_error(Side::Row, i, e))?;
        state.x[i * r..(i + 1) * r].copy_from_slice(&out);
    }
    for j in 0..g.n_cols() {
        if g.col_degree(j) == 0 {
            continue;
        }
        ls.reset();
        for (&i, &e) in g.col_neighbors(j).iter().zip(g.col_edge_ids(j)) {
            ls.add(&state.x[i * r..(i + 1) * r], view.values[e]);
        }
        ls.solve_into(&mut out)
            .map_err(|e| vertex_error(Side::Col, j, e))?;
        state.y[j * r..(j + 1) * r].copy_from_slice(&out);
    }
    state.iteration += 1;
    Ok(())
}

pub fn vls_iterate<T: Scalar>(
    state: &FactorState<T>,
    view: &ObservedView<'_, T>,
) -> Result<FactorState<T>> {
    let mut next = state.clone();
    let mut ls = LeastSquares::new(state.rank());
    vls_iterate_in_place(&mut next, view, &mut ls)?;
    Ok(next)
}

/// ELS needs every vertex to have at least two neighbors, otherwise some
/// message has no other neighbor to be fitted to.
pub fn check_els_structure(graph: &BipartiteGraph) -> Result<()> {
    match graph.first_vertex_below_degree(2) {
        None => Ok(()),
        Some((v, 0)) => Err(Error::Structural(format!(
            "{} vertex {} has no edges; edge least squares needs degree >= 2",
            v.side, v.index
        ))),
        Some((v, _)) => {
            let (i, j) = match v.side {
                Side::Row => (v.index, graph.row_neighbors(v.index)[0]),
                Side::Col => (graph.col_neighbors(v.index)[0], v.index),
            };
            Err(Error::Structural(format!(
                "{} vertex {} has degree 1, so the message on edge ({i}, {j}) has no other neighbor to fit",
                v.side, v.index
            )))
        }
    }
}

/// One ELS iteration in place. Assumes [`check_els_structure`] holds.
pub fn els_iterate_in_place<T: Scalar>(
    state: &mut MessageState<T>,
    view: &ObservedView<'_, T>,
    ls: &mut LeastSquares<T>,
) -> Result<()> {
    check_message_dims(state, view)?;
    let g = view.graph;
    let r = state.rank;
    let mut out = vec![T::zero(); r];

    for i in 0..g.n_rows() {
        let ids = g.row_edge_ids(i);
        for e in ids.clone() {
            ls.reset();
            for k in ids.clone().filter(|&k| k != e) {
                ls.add(&state.y_msgs[k * r..(k + 1) * r], view.values[k]);
            }
            ls.solve_into(&mut out)
                .map_err(|err| edge_error(g, e, Side::Row, err))?;
            state.x_msgs[e * r..(e + 1) * r].copy_from_slice(&out);
        }
    }
    for j in 0..g.n_cols() {
        let ids = g.col_edge_ids(j);
        for &e in ids {
            ls.reset();
            for &k in ids.iter().filter(|&&k| k != e) {
                ls.add(&state.x_msgs[k * r..(k + 1) * r], view.values[k]);
            }
            ls.solve_into(&mut out)
                .map_err(|err| edge_error(g, e, Side::Col, err))?;
            state.y_msgs[e * r..(e + 1) * r].copy_from_slice(&out);
        }
    }
    state.iteration += 1;
    Ok(())
}

fn edge_error(g: &BipartiteGraph, e: usize, side: Side, source: Error) -> Error {
    let (i, j) = g.edge(e);
    let what = match side {
        Side::Row => format!("message {i} -> {j}"),
        Side::Col => format!("message {j} -> {i}"),
    };
    Error::Structural(format!("{what}: {source}"))
}

pub fn els_iterate<T: Scalar>(
    state: &MessageState<T>,
    view: &ObservedView<'_, T>,
) -> Result<MessageState<T>> {
    check_els_structure(view.graph)?;
    let mut next = state.clone();
    let mut ls = LeastSquares::new(state.rank());
    els_iterate_in_place(&mut next, view, &mut ls)?;
    Ok(next)
}

/// Vertex estimates from messages: each vertex takes the mean of its
/// outgoing messages.
pub fn els_collapse<T: Scalar>(
    state: &MessageState<T>,
    graph: &BipartiteGraph,
) -> Result<FactorState<T>> {
    let mut out = FactorState::new(
        graph.n_rows(),
        state.rank(),
        vec![T::zero(); graph.n_rows() * state.rank()],
        vec![T::zero(); graph.n_cols() * state.rank()],
    )?;
    els_collapse_into(state, graph, &mut out)?;
    Ok(out)
}

pub fn els_collapse_into<T: Scalar>(
    state: &MessageState<T>,
    graph: &BipartiteGraph,
    out: &mut FactorState<T>,
) -> Result<()> {
    if state.n_edges() != graph.n_edges() {
        return Err(Error::DimensionMismatch(
            "message count differs from edge count".into(),
        ));
    }
    if let Some((v, _)) = graph.first_vertex_below_degree(1) {
        return Err(Error::Structural(format!(
            "{} vertex {} has no messages to average",
            v.side, v.index
        )));
    }
    let r = state.rank();
    for i in 0..graph.n_rows() {
        let deg = T::of(graph.row_degree(i) as f64);
        let row = &mut out.x[i * r..(i + 1) * r];
        row.iter_mut().for_each(|v| *v = T::zero());
        for e in graph.row_edge_ids(i) {
            for (acc, &m) in row.iter_mut().zip(state.x_msg(e)) {
                *acc += m;
            }
        }
        row.iter_mut().for_each(|v| *v /= deg);
    }
    for j in 0..graph.n_cols() {
        let deg = T::of(graph.col_degree(j) as f64);
        let row = &mut out.y[j * r..(j + 1) * r];
        row.iter_mut().for_each(|v| *v = T::zero());
        for &e in graph.col_edge_ids(j) {
            for (acc, &m) in row.iter_mut().zip(state.y_msg(e)) {
                *acc += m;
            }
        }
        row.iter_mut().for_each(|v| *v /= deg);
    }
    out.iteration = state.iteration;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Vls,
    Els,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vls => "vls",
            Algorithm::Els => "els",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vls" => Ok(Algorithm::Vls),
            "els" => Ok(Algorithm::Els),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Converged,
    Diverged,
    IterationCap,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Converged => "converged",
            Status::Diverged => "diverged",
            Status::IterationCap => "iteration-cap",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "running" => Ok(Status::Running),
            "converged" => Ok(Status::Converged),
            "diverged" => Ok(Status::Diverged),
            "iteration-cap" => Ok(Status::IterationCap),
            other => Err(Error::InvalidArgument(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    pub rms_tolerance: f64,
    pub divergence_cap: f64,
    /// Seed of the run; copied into the trace.
    pub seed: u64,
    pub record_every: usize,
}

impl SolveConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 500;
    pub const DEFAULT_RMS_TOLERANCE: f64 = 1e-3;
    pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e6;

    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            rms_tolerance: Self::DEFAULT_RMS_TOLERANCE,
            divergence_cap: Self::DEFAULT_DIVERGENCE_CAP,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.rms_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "rms_tolerance must be positive".into(),
            ));
        }
        if !(self.divergence_cap > self.rms_tolerance) {
            return Err(Error::InvalidArgument(
                "divergence_cap must exceed rms_tolerance".into(),
            ));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidArgument(
                "record_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub iteration: usize,
    pub rms: T,
    pub objective: T,
}

/// Recorded progress of one solve. `records` always starts at iteration 0
/// and ends with the final iteration.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub records: Vec<TraceRecord<T>>,
    pub status: Status,
    pub final_iteration: usize,
    pub seed: u64,
    /// Wall time of each iteration, in order; not part of equality.
    pub wall_time: Vec<Duration>,
}

impl<T: PartialEq> PartialEq for Trace<T> {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.status == other.status
            && self.final_iteration == other.final_iteration
            && self.seed == other.seed
    }
}

pub const TRACE_CSV_HEADER: &str = "iteration,rms,objective,status";

impl<T: Scalar> Trace<T> {
    pub fn final_rms(&self) -> T {
        self.records.last().map_or(T::nan(), |r| r.rms)
    }

    /// First recorded iteration whose rms is below `threshold`.
    pub fn first_below(&self, threshold: T) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rms < threshold)
            .map(|r| r.iteration)
    }

    /// CSV with one row per record; intermediate rows carry status
    /// `running`, the last row the final status.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_CSV_HEADER);
        s.push('\n');
        let last = self.records.len().saturating_sub(1);
        for (k, rec) in self.records.iter().enumerate() {
            let status = if k == last {
                self.status
            } else {
                Status::Running
            };
            s.push_str(&format!(
                "{},{},{},{}\n",
                rec.iteration, rec.rms, rec.objective, status
            ));
        }
        s
    }

    /// Parses [`Self::to_csv`] output back into `(records, final status)`.
    pub fn parse_csv(text: &str) -> Result<(Vec<TraceRecord<T>>, Status)> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == TRACE_CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{TRACE_CSV_HEADER}`"),
                })
            }
        }
        let mut records = Vec::new();
        let mut status = Status::Running;
        for (k, line) in lines {
            let line_no = k + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected 4 fields".into(),
                });
            }
            records.push(TraceRecord {
                iteration: parse_field(f[0], line_no)?,
                rms: parse_field(f[1], line_no)?,
                objective: parse_field(f[2], line_no)?,
            });
            status = f[3].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("unknown status `{}`", f[3]),
            })?;
        }
        Ok((records, status))
    }
}

/// Starting point of a solve; must match the algorithm.
#[derive(Debug, Clone, PartialEq)]
pub enum StartState<T> {
    Factors(FactorState<T>),
    Messages(MessageState<T>),
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    /// Final vertex estimates (collapsed messages for ELS).
    pub state: FactorState<T>,
    /// Final messages, ELS only.
    pub messages: Option<MessageState<T>>,
    pub trace: Trace<T>,
}

/// Callback view of the iterates after each iteration (and once for the
/// start state at iteration 0).
pub enum Snapshot<'a, T> {
    Factors(&'a FactorState<T>),
    Messages {
        messages: &'a MessageState<T>,
        collapsed: &'a FactorState<T>,
    },
}

/// Runs the configured algorithm until convergence, divergence or the
/// iteration cap.
///
/// The iterations only see [`Instance::view`]; the planted factors are used
/// for the RMS that drives the stopping rule.
pub fn run<T: Scalar>(
    inst: &Instance<T>,
    init: StartState<T>,
    config: &SolveConfig,
) -> Result<Solution<T>> {
    run_with_observer(inst, init, config, |_, _| {})
}

pub fn run_with_observer<T, F>(
    inst: &Instance<T>,
    init: StartState<T>,
    config: &SolveConfig,
    mut observer: F,
) -> Result<Solution<T>>
where
    T: Scalar,
    F: FnMut(usize, Snapshot<'_, T>),
{
    config.validate()?;
    let view = inst.view();
    let tol = T::of(config.rms_tolerance);
    let cap = T::of(config.divergence_cap);

    enum Iterate<T> {
        Vls(FactorState<T>),
        Els(MessageState<T>, FactorState<T>),
    }
    let mut current = match (config.algorithm, init) {
        (Algorithm::Vls, StartState::Factors(s)) => {
            check_factor_dims(&s, &view)?;
            Iterate::Vls(s)
        }
        (Algorithm::Els, StartState::Messages(m)) => {
            check_els_structure(view.graph)?;
            check_message_dims(&m, &view)?;
            let collapsed = els_collapse(&m, view.graph)?;
            Iterate::Els(m, collapsed)
        }
        (alg, _) => {
            return Err(Error::InvalidArgument(format!(
                "start state does not match algorithm {alg}"
            )))
        }
    };

    let mut ls = LeastSquares::new(inst.rank());
    let mut trace = Trace {
        records: Vec::new(),
        status: Status::Running,
        final_iteration: 0,
        seed: config.seed,
        wall_time: Vec::new(),
    };

    let mut t = 0;
    loop {
        let (factors, finite) = match &current {
            Iterate::Vls(s) => {
                observer(t, Snapshot::Factors(s));
                (s, s.is_finite())
            }
            Iterate::Els(m, c) => {
                observer(
                    t,
                    Snapshot::Messages {
                        messages: m,
                        collapsed: c,
                    },
                );
                (c, m.is_finite() && c.is_finite())
            }
        };

        // cheap Gram-form estimate every iteration, exact dense RMS when it
        // decides the status or gets recorded
        let status = if !finite {
            Status::Diverged
        } else {
            let fast = metrics::rms_fast(factors, inst)?;
            let near_tol = fast < tol * T::of(4.0);
            let exact = if near_tol || !fast.is_finite() || fast > cap {
                Some(metrics::rms(factors, inst)?)
            } else {
                None
            };
            match exact {
                Some(e) if !e.is_finite() || e > cap => Status::Diverged,
                Some(e) if e < tol => Status::Converged,
                _ if t >= config.max_iterations => Status::IterationCap,
                _ => Status::Running,
            }
        };

        let finished = status != Status::Running;
        if finished || t % config.record_every == 0 {
            let rms = metrics::rms(factors, inst)?;
            let objective = metrics::objective(factors, &view)?;
            trace.records.push(TraceRecord {
                iteration: t,
                rms,
                objective,
            });
        }
        if finished {
            trace.status = status;
            trace.final_iteration = t;
            break;
        }

        let started = Instant::now();
        match &mut current {
            Iterate::Vls(s) => vls_iterate_in_place(s, &view, &mut ls)?,
            Iterate::Els(m, c) => {
                els_iterate_in_place(m, &view, &mut ls)?;
                els_collapse_into(m, view.graph, c)?;
            }
        }
        trace.wall_time.push(started.elapsed());
        t += 1;
    }

    Ok(match current {
        Iterate::Vls(state) => Solution {
            state,
            messages: None,
            trace,
        },
        Iterate::Els(messages, state) => Solution {
            state,
            messages: Some(messages),
            trace,
        },
    })
}

/// Computation charged to one iteration, in units of a VLS iteration: ELS
/// solves one problem per directed edge, about `max_degree` times more.
pub fn iteration_cost(algorithm: Algorithm, graph: &BipartiteGraph) -> usize {
    match algorithm {
        Algorithm::Vls => 1,
        Algorithm::Els => graph.max_degree(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_random_regular_bipartite;
    use crate::instance::{
        gen_rank1_instance, gen_rank_r_instance, make_init, make_message_init, InitSpec,
    };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn vertex_solve_examples() {
        let one = [1.0];
        let two = [2.0];
        assert_eq!(
            vls_vertex_solve(&[(&one[..], 2.0), (&two[..], 4.0)]).unwrap(),
            vec![2.0]
        );
        assert_eq!(
            vls_vertex_solve(&[(&one[..], 1.0), (&one[..], 3.0)]).unwrap(),
            vec![2.0]
        );
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let x = vls_vertex_solve(&[(&e1[..], 3.0), (&e2[..], 5.0)]).unwrap();
        assert!(close(x[0], 3.0, 1e-12) && close(x[1], 5.0, 1e-12));
    }

    #[test]
    fn vertex_solve_errors() {
        assert_eq!(vls_vertex_solve::<f64>(&[]), Err(Error::EmptyTargets));
        let zero = [0.0];
        assert_eq!(
            vls_vertex_solve(&[(&zero[..], 1.0)]),
            Err(Error::ZeroDenominator)
        );
        let a = [1.0];
        let b = [1.0, 2.0];
        assert!(vls_vertex_solve(&[(&a[..], 1.0), (&b[..], 1.0)]).is_err());
    }

    #[test]
    fn edge_solve_matches_vertex_solve() {
        let y = [[0.3], [1.7], [0.9]];
        let targets: Vec<(&[f64], f64)> = y
            .iter()
            .zip([1.0, 2.0, 0.5])
            .map(|(v, m)| (&v[..], m))
            .collect();
        assert_eq!(
            els_edge_solve(&targets).unwrap(),
            vls_vertex_solve(&targets).unwrap()
        );
        // single remaining neighbor: exact solve M / y
        let x = els_edge_solve(&targets[1..2]).unwrap();
        assert!(close(x[0], 2.0 / 1.7, 1e-15));
    }

    #[test]
    fn vls_ground_truth_fixed_point() {
        let g = gen_random_regular_bipartite(20, 3, 1).unwrap();
        let inst: Instance<f64> = gen_rank_r_instance(g, 2, 4).unwrap();
        let gt = inst.ground_truth();
        let next = vls_iterate(&gt, &inst.view()).unwrap();
        for (a, b) in gt
            .x()
            .iter()
            .chain(gt.y())
            .zip(next.x().iter().chain(next.y()))
        {
            assert!(close(*a, *b, 1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn vls_hand_evaluated_on_k22() {
        let inst = Instance::from_factors(
            BipartiteGraph::complete(2, 2),
            1,
            vec![1.0, 2.0],
            vec![3.0, 0.5],
            None,
            0,
        )
        .unwrap();
        let s = FactorState::new(2, 1, vec![1.0, 1.0], vec![2.0, 1.0]).unwrap();
        let next = vls_iterate(&s, &inst.view()).unwrap();
        // x_i = (M_i0 * 2 + M_i1 * 1) / (4 + 1)
        let x0 = (3.0 * 2.0 + 0.5 * 1.0) / 5.0;
        let x1 = (6.0 * 2.0 + 1.0 * 1.0) / 5.0;
        // y_j = (M_0j x0 + M_1j x1) / (x0^2 + x1^2)
        let den = x0 * x0 + x1 * x1;
        let y0 = (3.0 * x0 + 6.0 * x1) / den;
        let y1 = (0.5 * x0 + 1.0 * x1) / den;
        assert!(close(next.x()[0], x0, 1e-14) && close(next.x()[1], x1, 1e-14));
        assert!(close(next.y()[0], y0, 1e-14) && close(next.y()[1], y1, 1e-14));
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn vls_keeps_isolated_vertices() {
        let g = BipartiteGraph::from_edges(3, 3, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let inst: Instance<f64> = gen_rank1_instance(g, 0.01, 0).unwrap();
        let s = FactorState::new(3, 1, vec![1.0, 2.0, 7.0], vec![1.0, 1.0, 9.0]).unwrap();
        let next = vls_iterate(&s, &inst.view()).unwrap();
        assert_eq!(next.x()[2], 7.0);
        assert_eq!(next.y()[2], 9.0);
    }

    #[test]
    fn vls_error_names_vertex() {
        let inst = Instance::from_factors(
            BipartiteGraph::complete(2, 2),
            1,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            None,
            0,
        )
        .unwrap();
        let s = FactorState::new(2, 1, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        match vls_iterate(&s, &inst.view()) {
            Err(Error::Vertex {
                side: Side::Row,
                index: 0,
                source,
            }) => {
                assert_eq!(*source, Error::ZeroDenominator)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn els_ground_truth_fixed_point() {
        let g = gen_random_regular_bipartite(20, 3, 1).unwrap();
        let inst: Instance<f64> = gen_rank_r_instance(g, 2, 4).unwrap();
        let m = make_message_init(&inst, &InitSpec::ground_truth()).unwrap();
        let next = els_iterate(&m, &inst.view()).unwrap();
        for (a, b) in m.x_msgs().iter().zip(next.x_msgs()) {
            assert!(close(*a, *b, 1e-9), "{a} vs {b}");
        }
        let c = els_collapse(&next, inst.graph()).unwrap();
        for (a, b) in c.x().iter().zip(inst.alpha()) {
            assert!(close(*a, *b, 1e-9));
        }
    }

    #[test]
    fn els_hand_evaluated_on_k22() {
        let inst = Instance::from_factors(
            BipartiteGraph::complete(2, 2),
            1,
            vec![1.0, 2.0],
            vec![3.0, 0.5],
            None,
            0,
        )
        .unwrap();
        // edges: 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1)
        let m =
            MessageState::new(4, 1, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 1.5, 2.5, 3.5]).unwrap();
        let next = els_iterate(&m, &inst.view()).unwrap();
        let mij = |i: usize, j: usize| [1.0, 2.0][i] * [3.0, 0.5][j];
        // x_{i->j} uses the other neighbor k: M_ik / y_{k->i}
        let x = [
            mij(0, 1) / 1.5, // x_{0->0} from y_{1->0} (edge 1)
            mij(0, 0) / 0.5, // x_{0->1} from y_{0->0} (edge 0)
            mij(1, 1) / 3.5, // x_{1->0} from y_{1->1} (edge 3)
            mij(1, 0) / 2.5, // x_{1->1} from y_{0->1} (edge 2)
        ];
        // y_{j->i} uses the other row k: M_kj / x_{k->j} with fresh x
        let y = [
            mij(1, 0) / x[2], // y_{0->0} from x_{1->0}
            mij(1, 1) / x[3], // y_{1->0} from x_{1->1}
            mij(0, 0) / x[0], // y_{0->1} from x_{0->0}
            mij(0, 1) / x[1], // y_{1->1} from x_{0->1}
        ];
        for e in 0..4 {
            assert!(close(next.x_msgs()[e], x[e], 1e-14));
            assert!(close(next.y_msgs()[e], y[e], 1e-14));
        }
    }

    #[test]
    fn els_rejects_degree_one() {
        let path = BipartiteGraph::from_edges(2, 2, [(0, 0), (1, 0), (1, 1)]).unwrap();
        let err = check_els_structure(&path).unwrap_err();
        let Error::Structural(msg) = err else {
            panic!()
        };
        assert!(
            msg.contains("row vertex 0") && msg.contains("(0, 0)"),
            "{msg}"
        );
    }

    #[test]
    fn collapse_averages() {
        let g = BipartiteGraph::complete(1, 2);
        let g = BipartiteGraph::from_edges(2, 2, g.edges().iter().copied().chain([(1, 0), (1, 1)]))
            .unwrap();
        let m =
            MessageState::new(4, 1, vec![1.0, 3.0, 5.0, 5.0], vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let c = els_collapse(&m, &g).unwrap();
        assert_eq!(c.x(), &[2.0, 5.0]);
        // column 0 gets y on edges 0 and 2, column 1 on edges 1 and 3
        assert_eq!(c.y(), &[4.0, 6.0]);
        let lonely = BipartiteGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let m = MessageState::new(3, 1, vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert!(els_collapse(&m, &lonely).is_ok());
        let iso = BipartiteGraph::from_edges(2, 2, [(0, 0), (0, 1)]).unwrap();
        let m = MessageState::new(2, 1, vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(els_collapse(&m, &iso).is_err());
    }

    #[test]
    fn run_ground_truth_converges_immediately() {
        let g = gen_random_regular_bipartite(30, 3, 1).unwrap();
        let inst: Instance<f64> = gen_rank1_instance(g, 0.01, 2).unwrap();
        for alg in [Algorithm::Vls, Algorithm::Els] {
            let init = match alg {
                Algorithm::Vls => {
                    StartState::Factors(make_init(&inst, &InitSpec::ground_truth()).unwrap())
                }
                Algorithm::Els => StartState::Messages(
                    make_message_init(&inst, &InitSpec::ground_truth()).unwrap(),
                ),
            };
            let sol = run(&inst, init, &SolveConfig::new(alg)).unwrap();
            assert_eq!(sol.trace.status, Status::Converged);
            assert_eq!(sol.trace.final_iteration, 0);
            assert!(sol.trace.final_rms() < 1e-15);
        }
    }

    #[test]
    fn run_detects_non_finite() {
        let g = gen_random_regular_bipartite(10, 3, 1).unwrap();
        let inst: Instance<f64> = gen_rank1_instance(g, 0.01, 2).unwrap();
        let mut s = make_init(&inst, &InitSpec::uniform_box(0.5, 1)).unwrap();
        s.y_mut()[0] = f64::NAN;
        let sol = run(
            &inst,
            StartState::Factors(s),
            &SolveConfig::new(Algorithm::Vls),
        )
        .unwrap();
        assert_eq!(sol.trace.status, Status::Diverged);
        assert_eq!(sol.trace.final_iteration, 0);

        let mut m = make_message_init(&inst, &InitSpec::uniform_box(0.5, 1)).unwrap();
        m.x_msgs_mut()[3] = f64::INFINITY;
        let sol = run(
            &inst,
            StartState::Messages(m),
            &SolveConfig::new(Algorithm::Els),
        )
        .unwrap();
        assert_eq!(sol.trace.status, Status::Diverged);
    }

    #[test]
    fn run_rejects_mismatched_start_and_bad_config() {
        let inst: Instance<f64> =
            gen_rank1_instance(BipartiteGraph::complete(3, 3), 0.01, 2).unwrap();
        let s = inst.ground_truth();
        assert!(run(
            &inst,
            StartState::Factors(s.clone()),
            &SolveConfig::new(Algorithm::Els)
        )
        .is_err());
        let mut cfg = SolveConfig::new(Algorithm::Vls);
        cfg.max_iterations = 0;
        assert!(run(&inst, StartState::Factors(s.clone()), &cfg).is_err());
        cfg = SolveConfig::new(Algorithm::Vls);
        cfg.divergence_cap = 1e-4;
        assert!(run(&inst, StartState::Factors(s), &cfg).is_err());
    }

    #[test]
    fn run_hits_iteration_cap_and_records() {
        let g = gen_random_regular_bipartite(40, 3, 1).unwrap();
        let inst: Instance<f64> = gen_rank1_instance(g, 0.01, 2).unwrap();
        let s = make_init(&inst, &InitSpec::uniform_box(0.01, 1)).unwrap();
        let mut cfg = SolveConfig::new(Algorithm::Vls);
        cfg.max_iterations = 3;
        cfg.rms_tolerance = 1e-300;
        cfg.record_every = 2;
        let sol = run(&inst, StartState::Factors(s), &cfg).unwrap();
        assert_eq!(sol.trace.status, Status::IterationCap);
        let its: Vec<usize> = sol.trace.records.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![0, 2, 3]);
        assert_eq!(sol.trace.wall_time.len(), 3);
    }

    #[test]
    fn trace_csv_round_trip() {
        let g = gen_random_regular_bipartite(30, 3, 5).unwrap();
        let inst: Instance<f64> = gen_rank1_instance(g, 0.01, 2).unwrap();
        let s = make_init(&inst, &InitSpec::uniform_box(0.01, 1)).unwrap();
        let sol = run(
            &inst,
            StartState::Factors(s),
            &SolveConfig::new(Algorithm::Vls),
        )
        .unwrap();
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

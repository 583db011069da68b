//! Oracle-assisted diagnostics for rank-1 runs.
//!
//! Dividing the iterates by the planted factors gives ratio vectors
//! `u_i = x_i / alpha_i` and `v_j = y_j / beta_j`. For rank 1 with positive
//! data one full VLS iteration maps `u_t` to `u_{t+1} = P_t u_t` where `P_t`
//! is row-stochastic:
//!
//! ```text
//! P_t[i1, i2] = sum_{j ~ i1, j ~ i2} (y_j^2 / sum_{k ~ i1} y_k^2)
//!                                   * (alpha_i2 x_i2 / sum_{k ~ j} alpha_k x_k)
//! ```
//!
//! evaluated at `(x_t, y_t)`. The identity needs `y_t` to be the column
//! update computed from `x_t`, so `P_t` is defined from `t = 1` on. Rows of
//! vertices without edges are identity rows.
//!
//! ELS has the same structure on row-to-column messages, with every sum
//! restricted to the non-addressee neighbors.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::metrics::envelope;
use crate::scalar::Scalar;
use crate::solver::{
    check_els_structure, els_collapse, els_iterate_in_place, vls_iterate_in_place, Algorithm,
    FactorState, LeastSquares, MessageState, StartState,
};

/// Row-side and column-side ratio vectors. For messages they are indexed by
/// edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioVectors<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

fn require_rank1<T: Scalar>(inst: &Instance<T>) -> Result<()> {
    if inst.rank() != 1 {
        return Err(Error::InvalidArgument(format!(
            "ratio diagnostics are rank 1 only, instance has rank {}",
            inst.rank()
        )));
    }
    Ok(())
}

pub fn ratio_vectors<T: Scalar>(
    state: &FactorState<T>,
    inst: &Instance<T>,
) -> Result<RatioVectors<T>> {
    require_rank1(inst)?;
    if state.rank() != 1 || state.n() != inst.n() {
        return Err(Error::DimensionMismatch(
            "state does not match instance".into(),
        ));
    }
    Ok(RatioVectors {
        u: state
            .x()
            .iter()
            .zip(inst.alpha())
            .map(|(&x, &a)| x / a)
            .collect(),
        v: state
            .y()
            .iter()
            .zip(inst.beta())
            .map(|(&y, &b)| y / b)
            .collect(),
    })
}

/// `u_{i->j} = x_{i->j} / alpha_i` and `v_{j->i} = y_{j->i} / beta_j`.
pub fn message_ratio_vectors<T: Scalar>(
    state: &MessageState<T>,
    inst: &Instance<T>,
) -> Result<RatioVectors<T>> {
    require_rank1(inst)?;
    let g = inst.graph();
    if state.rank() != 1 || state.n_edges() != g.n_edges() {
        return Err(Error::DimensionMismatch(
            "messages do not match instance".into(),
        ));
    }
    let (alpha, beta) = (inst.alpha(), inst.beta());
    Ok(RatioVectors {
        u: g.edges()
            .iter()
            .zip(state.x_msgs())
            .map(|(&(i, _), &x)| x / alpha[i])
            .collect(),
        v: g.edges()
            .iter()
            .zip(state.y_msgs())
            .map(|(&(_, j), &y)| y / beta[j])
            .collect(),
    })
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = T::one();
        }
        m
    }

    pub fn from_rows(dim: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// `max_i |sum_j P[i, j] - 1|`.
    pub fn row_sum_error(&self) -> T {
        (0..self.dim)
            .map(|i| (self.row(i).iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn min_entry(&self) -> Option<T> {
        self.entries.iter().copied().reduce(T::min)
    }

    pub fn min_nonzero(&self) -> Option<T> {
        self.entries
            .iter()
            .copied()
            .filter(|&v| v != T::zero())
            .reduce(T::min)
    }

    /// Non-zero pattern, row-major.
    pub fn support(&self) -> Vec<bool> {
        self.entries.iter().map(|&v| v != T::zero()).collect()
    }

    /// `P * w`.
    pub fn apply(&self, w: &[T]) -> Vec<T> {
        assert_eq!(w.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(w).map(|(&p, &x)| p * x).sum())
            .collect()
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.entries[k * n + j];
                }
            }
        }
        out
    }
}

fn require_positive<T: Scalar>(values: &[T], what: &str) -> Result<()> {
    match values.iter().position(|&v| !(v > T::zero())) {
        None => Ok(()),
        Some(k) => Err(Error::InvalidArgument(format!(
            "{what}[{k}] = {} is not positive",
            values[k]
        ))),
    }
}

/// The `P_t` of one VLS iteration, built from the state at time `t`.
pub fn extract_transition_matrix<T: Scalar>(
    state: &FactorState<T>,
    inst: &Instance<T>,
) -> Result<TransitionMatrix<T>> {
    require_rank1(inst)?;
    if state.rank() != 1 || state.n() != inst.n() {
        return Err(Error::DimensionMismatch(
            "state does not match instance".into(),
        ));
    }
    require_positive(state.x(), "x")?;
    require_positive(state.y(), "y")?;
    require_positive(inst.alpha(), "alpha")?;
    require_positive(inst.beta(), "beta")?;

    let g = inst.graph();
    let n = inst.n();
    let (x, y, alpha) = (state.x(), state.y(), inst.alpha());
    let col_mass: Vec<T> = (0..n)
        .map(|j| g.col_neighbors(j).iter().map(|&k| alpha[k] * x[k]).sum())
        .collect();

    let mut p = TransitionMatrix::zeros(n);
    for i1 in 0..n {
        let nb = g.row_neighbors(i1);
        if nb.is_empty() {
            p.entries[i1 * n + i1] = T::one();
            continue;
        }
        let s: T = nb.iter().map(|&j| y[j] * y[j]).sum();
        for &j in nb {
            let w = y[j] * y[j] / s;
            for &i2 in g.col_neighbors(j) {
                p.entries[i1 * n + i2] += w * alpha[i2] * x[i2] / col_mass[j];
            }
        }
    }
    Ok(p)
}

/// The ELS analogue on row-to-column messages, indexed by edge id.
pub fn extract_message_transition_matrix<T: Scalar>(
    state: &MessageState<T>,
    inst: &Instance<T>,
) -> Result<TransitionMatrix<T>> {
    require_rank1(inst)?;
    let g = inst.graph();
    if state.rank() != 1 || state.n_edges() != g.n_edges() {
        return Err(Error::DimensionMismatch(
            "messages do not match instance".into(),
        ));
    }
    check_els_structure(g)?;
    require_positive(state.x_msgs(), "x message")?;
    require_positive(state.y_msgs(), "y message")?;
    require_positive(inst.alpha(), "alpha")?;
    require_positive(inst.beta(), "beta")?;

    let m = g.n_edges();
    let (x, y, alpha) = (state.x_msgs(), state.y_msgs(), inst.alpha());
    // alpha_l * x_{l->k} per edge (l, k)
    let weight: Vec<T> = g
        .edges()
        .iter()
        .zip(x)
        .map(|(&(l, _), &xv)| alpha[l] * xv)
        .collect();

    let mut p = TransitionMatrix::zeros(m);
    for i in 0..g.n_rows() {
        let row_ids = g.row_edge_ids(i);
        for e in row_ids.clone() {
            let s: T = row_ids
                .clone()
                .filter(|&k| k != e)
                .map(|k| y[k] * y[k])
                .sum();
            for via in row_ids.clone().filter(|&k| k != e) {
                // via = (i, k): the message y_{k->i} feeding x_{i->j}
                let w = y[via] * y[via] / s;
                let (_, k) = g.edge(via);
                let col_ids = g.col_edge_ids(k);
                let mass: T = col_ids
                    .iter()
                    .filter(|&&f| f != via)
                    .map(|&f| weight[f])
                    .sum();
                for &f in col_ids.iter().filter(|&&f| f != via) {
                    p.entries[e * m + f] += w * weight[f] / mass;
                }
            }
        }
    }
    Ok(p)
}

/// The lower bound `b^6 / max_degree` on non-zero transition entries.
pub fn entry_lower_bound(b: f64, max_degree: usize) -> f64 {
    b.powi(6) / max_degree as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryBoundReport<T> {
    pub bound: T,
    pub min_nonzero: Option<T>,
    /// `(row, col, value)` of every non-zero entry below the bound.
    pub violations: Vec<(usize, usize, T)>,
}

impl<T> EntryBoundReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_entry_lower_bound<T: Scalar>(
    p: &TransitionMatrix<T>,
    b: f64,
    max_degree: usize,
) -> EntryBoundReport<T> {
    let bound = T::of(entry_lower_bound(b, max_degree));
    let n = p.dim();
    let mut violations = Vec::new();
    for i in 0..n {
        for (j, &v) in p.row(i).iter().enumerate() {
            if v != T::zero() && v < bound {
                violations.push((i, j, v));
            }
        }
    }
    EntryBoundReport {
        bound,
        min_nonzero: p.min_nonzero(),
        violations,
    }
}

/// Composition of the first `d` matrices in iteration order, i.e. the map
/// `u_t -> u_{t+d}`: `P_{d-1} * ... * P_0`.
pub fn window_product<T: Scalar>(
    ps: &[TransitionMatrix<T>],
    d: usize,
) -> Result<TransitionMatrix<T>> {
    if d == 0 || ps.len() < d {
        return Err(Error::InvalidArgument(format!(
            "window of length {d} needs at least that many matrices, got {}",
            ps.len()
        )));
    }
    let mut q = ps[0].clone();
    for p in &ps[1..d] {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch(
                "matrices in a window must share a dimension".into(),
            ));
        }
        q = p.matmul(&q);
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport<T> {
    pub min_entry: T,
    /// `z^d`.
    pub bound: T,
    pub strictly_positive: bool,
    pub below_bound: usize,
}

pub fn verify_window<T: Scalar>(q: &TransitionMatrix<T>, z: f64, d: usize) -> WindowReport<T> {
    let bound = T::of(z.powi(d as i32));
    let min_entry = q.min_entry().unwrap_or(T::zero());
    WindowReport {
        min_entry,
        bound,
        strictly_positive: min_entry > T::zero(),
        below_bound: q.entries().iter().filter(|&&v| v < bound).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionPoint<T> {
    pub t: usize,
    pub spread: T,
    pub max: T,
    pub min: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport<T> {
    pub points: Vec<ContractionPoint<T>>,
    /// Times `t` at which the envelope of `u_t` is not inside that of
    /// `u_{t-1}`.
    pub envelope_violations: Vec<usize>,
}

impl<T: Scalar> ContractionReport<T> {
    /// First time the spread drops to `delta` or below.
    pub fn first_below(&self, delta: T) -> Option<usize> {
        self.points.iter().find(|p| p.spread <= delta).map(|p| p.t)
    }
}

/// Slack for envelope comparisons, relative to the magnitude involved.
pub const ENVELOPE_SLACK: f64 = 1e-12;

fn envelope_ok<T: Scalar>(prev: &ContractionPoint<T>, next: &ContractionPoint<T>) -> bool {
    let slack = |v: T| T::of(ENVELOPE_SLACK) * v.abs().max(T::one());
    next.max <= prev.max + slack(prev.max) && next.min >= prev.min - slack(prev.min)
}

/// Spread sequence of a series of ratio vectors, with the envelope check
/// between consecutive entries.
pub fn contraction_trace<T: Scalar>(series: &[(usize, Vec<T>)]) -> Result<ContractionReport<T>> {
    let mut points: Vec<ContractionPoint<T>> = Vec::with_capacity(series.len());
    let mut envelope_violations = Vec::new();
    for (t, u) in series {
        let (min, max) = envelope(u)?;
        let point = ContractionPoint {
            t: *t,
            spread: max - min,
            max,
            min,
        };
        if let Some(prev) = points.last() {
            if !envelope_ok(prev, &point) {
                envelope_violations.push(*t);
            }
        }
        points.push(point);
    }
    Ok(ContractionReport {
        points,
        envelope_violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticConfig {
    pub algorithm: Algorithm,
    /// Number of transition matrices to extract (`P_1 ..= P_iterations`).
    pub iterations: usize,
    /// Entry bound of the instance and initialization.
    pub b: f64,
    /// Number of leading matrices (`P_1, P_2, ...`) to keep in the report.
    pub keep_matrices: usize,
}

/// Tolerances the diagnostics enforce.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    RowSum,
    Consistency,
    IterateBound,
    EntryBound,
    Envelope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow<T> {
    pub t: usize,
    pub spread_u: T,
    pub max_u: T,
    pub min_u: T,
    pub min_nonzero_p: T,
    pub row_sum_err: T,
}

pub const DIAGNOSTIC_CSV_HEADER: &str = "t,spread_u,max_u,min_u,min_nonzero_P,row_sum_err";

#[derive(Debug, Clone)]
pub struct DiagnosticReport<T> {
    pub rows: Vec<DiagnosticRow<T>>,
    pub violations: Vec<Violation>,
    /// The first `keep_matrices` of `P_1, P_2, ...`.
    pub matrices: Vec<TransitionMatrix<T>>,
    /// Vertex estimates after the last iteration (collapsed for ELS).
    pub final_state: FactorState<T>,
    /// `z = b^6 / max_degree`.
    pub z: f64,
    pub diameter: Option<usize>,
    /// `-(d / ln n) * ln z`, the exponent in the `n^-alpha` contraction rate,
    /// when the graph is connected.
    pub contraction_exponent: Option<f64>,
}

impl<T: Scalar> DiagnosticReport<T> {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn to_csv(&self) -> String {
        diagnostic_rows_to_csv(&self.rows)
    }
}

pub fn diagnostic_rows_to_csv<T: Scalar>(rows: &[DiagnosticRow<T>]) -> String {
    let mut s = String::from(DIAGNOSTIC_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.t, r.spread_u, r.max_u, r.min_u, r.min_nonzero_p, r.row_sum_err
        );
    }
    s
}

pub fn parse_diagnostic_csv<T: Scalar>(text: &str) -> Result<Vec<DiagnosticRow<T>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == DIAGNOSTIC_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{DIAGNOSTIC_CSV_HEADER}`"),
            })
        }
    }
    lines
        .map(|(k, line)| {
            let line_no = k + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected 6 fields".into(),
                });
            }
            let num = |s: &str| {
                s.parse::<T>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cannot parse `{s}`"),
                })
            };
            Ok(DiagnosticRow {
                t: f[0].parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cannot parse `{}`", f[0]),
                })?,
                spread_u: num(f[1])?,
                max_u: num(f[2])?,
                min_u: num(f[3])?,
                min_nonzero_p: num(f[4])?,
                row_sum_err: num(f[5])?,
            })
        })
        .collect()
}

fn relative_gap<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs()).max(T::min_positive_value());
    (a - b).abs() / scale
}

struct Checker<'a, T> {
    violations: &'a mut Vec<Violation>,
    lo: T,
    hi: T,
}

impl<T: Scalar> Checker<'_, T> {
    fn bounds<'v>(&mut self, t: usize, what: &str, values: impl Iterator<Item = &'v T>) {
        let (lo, hi) = (self.lo, self.hi);
        let bad: Vec<T> = values.copied().filter(|&v| !(v >= lo && v <= hi)).collect();
        if let Some(first) = bad.first() {
            self.violations.push(Violation {
                t,
                kind: ViolationKind::IterateBound,
                detail: format!(
                    "{} {what} value(s) outside [b^3, 1/b^3], e.g. {first}",
                    bad.len()
                ),
            });
        }
    }
}

/// Runs `config.iterations + 1` iterations of the chosen algorithm from
/// `start`, extracting `P_t` for `t = 1..=iterations` and checking
///
/// - row sums within [`ROW_SUM_TOLERANCE`] of 1,
/// - `u_{t+1} = P_t u_t` within [`CONSISTENCY_TOLERANCE`] relative,
/// - every iterate inside `[b^3, 1/b^3]`,
/// - every non-zero entry of `P_t` at least `b^6 / max_degree`,
/// - the envelope of `u_{t+1}` inside that of `u_t`.
pub fn diagnose<T: Scalar>(
    inst: &Instance<T>,
    start: StartState<T>,
    config: &DiagnosticConfig,
) -> Result<DiagnosticReport<T>> {
    require_rank1(inst)?;
    if !(config.b > 0.0 && config.b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "b must lie in (0, 1), got {}",
            config.b
        )));
    }
    let g = inst.graph();
    let view = inst.view();
    let max_degree = g.max_degree().max(1);
    let z = entry_lower_bound(config.b, max_degree);
    let b3 = config.b.powi(3);

    let mut violations = Vec::new();
    let mut checker = Checker {
        violations: &mut violations,
        lo: T::of(b3),
        hi: T::of(1.0 / b3),
    };
    let mut rows = Vec::with_capacity(config.iterations);
    let mut matrices = Vec::new();
    let mut ratios: Vec<(usize, Vec<T>)> = Vec::with_capacity(config.iterations + 1);
    let mut ls = LeastSquares::new(1);

    let final_state = match (config.algorithm, start) {
        (Algorithm::Vls, StartState::Factors(mut state)) => {
            checker.bounds(0, "x", state.x().iter());
            checker.bounds(0, "y", state.y().iter());
            vls_iterate_in_place(&mut state, &view, &mut ls)?;
            for t in 1..=config.iterations + 1 {
                checker.bounds(t, "x", state.x().iter());
                checker.bounds(t, "y", state.y().iter());
                let u = ratio_vectors(&state, inst)?.u;
                ratios.push((t, u.clone()));
                if t > config.iterations {
                    break;
                }
                let p = extract_transition_matrix(&state, inst)?;
                vls_iterate_in_place(&mut state, &view, &mut ls)?;
                let next_u = ratio_vectors(&state, inst)?.u;
                rows.push(record_step(
                    t,
                    &p,
                    &u,
                    &next_u,
                    config.b,
                    max_degree,
                    checker.violations,
                )?);
                if matrices.len() < config.keep_matrices {
                    matrices.push(p);
                }
            }
            state
        }
        (Algorithm::Els, StartState::Messages(mut state)) => {
            check_els_structure(g)?;
            checker.bounds(0, "x message", state.x_msgs().iter());
            checker.bounds(0, "y message", state.y_msgs().iter());
            els_iterate_in_place(&mut state, &view, &mut ls)?;
            for t in 1..=config.iterations + 1 {
                checker.bounds(t, "x message", state.x_msgs().iter());
                checker.bounds(t, "y message", state.y_msgs().iter());
                let u = message_ratio_vectors(&state, inst)?.u;
                ratios.push((t, u.clone()));
                if t > config.iterations {
                    break;
                }
                let p = extract_message_transition_matrix(&state, inst)?;
                els_iterate_in_place(&mut state, &view, &mut ls)?;
                let next_u = message_ratio_vectors(&state, inst)?.u;
                rows.push(record_step(
                    t,
                    &p,
                    &u,
                    &next_u,
                    config.b,
                    max_degree,
                    checker.violations,
                )?);
                if matrices.len() < config.keep_matrices {
                    matrices.push(p);
                }
            }
            els_collapse(&state, g)?
        }
        (alg, _) => {
            return Err(Error::InvalidArgument(format!(
                "start state does not match algorithm {alg}"
            )))
        }
    };

    let contraction = contraction_trace(&ratios)?;
    for t in contraction.envelope_violations {
        violations.push(Violation {
            t,
            kind: ViolationKind::Envelope,
            detail: "ratio envelope grew".into(),
        });
    }

    let diameter = g.diameter().ok();
    let n = inst.n() as f64;
    let contraction_exponent = diameter
        .filter(|_| n > 1.0)
        .map(|d| -(d as f64 / n.ln()) * z.ln());

    Ok(DiagnosticReport {
        rows,
        violations,
        matrices,
        final_state,
        z,
        diameter,
        contraction_exponent,
    })
}

fn record_step<T: Scalar>(
    t: usize,
    p: &TransitionMatrix<T>,
    u: &[T],
    next_u: &[T],
    b: f64,
    max_degree: usize,
    violations: &mut Vec<Violation>,
) -> Result<DiagnosticRow<T>> {
    let row_sum_err = p.row_sum_error();
    if row_sum_err > T::of(ROW_SUM_TOLERANCE) {
        violations.push(Violation {
            t,
            kind: ViolationKind::RowSum,
            detail: format!("row sum error {row_sum_err}"),
        });
    }
    let predicted = p.apply(u);
    let worst = predicted
        .iter()
        .zip(next_u)
        .map(|(&a, &b)| relative_gap(a, b))
        .fold(T::zero(), T::max);
    if !(worst <= T::of(CONSISTENCY_TOLERANCE)) {
        violations.push(Violation {
            t,
            kind: ViolationKind::Consistency,
            detail: format!("P_t u_t differs from u_(t+1) by {worst} relative"),
        });
    }
    let bound = verify_entry_lower_bound(p, b, max_degree);
    if let Some(&(i, j, v)) = bound.violations.first() {
        violations.push(Violation {
            t,
            kind: ViolationKind::EntryBound,
            detail: format!(
                "{} entries below {}, e.g. P[{i},{j}] = {v}",
                bound.violations.len(),
                bound.bound
            ),
        });
    }
    let (min_u, max_u) = envelope(u)?;
    Ok(DiagnosticRow {
        t,
        spread_u: max_u - min_u,
        max_u,
        min_u,
        min_nonzero_p: p.min_nonzero().unwrap_or(T::zero()),
        row_sum_err,
    })
}

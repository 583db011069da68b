//! Error measures for completed matrices and ratio vectors.

use crate::error::{Error, Result};
use crate::instance::{dot, Instance, ObservedView};
use crate::scalar::Scalar;
use crate::solver::FactorState;

fn check_dims<T: Scalar>(state: &FactorState<T>, inst: &Instance<T>) -> Result<()> {
    if state.n() != inst.n() || state.rank() != inst.rank() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, instance is {}x{}",
            state.n(),
            state.rank(),
            inst.n(),
            inst.rank()
        )));
    }
    Ok(())
}

/// `(1/n) * ||alpha beta^T - X Y^T||_F` over the full `n x n` matrix.
pub fn rms<T: Scalar>(state: &FactorState<T>, inst: &Instance<T>) -> Result<T> {
    check_dims(state, inst)?;
    let n = inst.n();
    if n == 0 {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for i in 0..n {
        let (a, x) = (inst.alpha_row(i), state.x_row(i));
        for j in 0..n {
            let d = dot(a, inst.beta_row(j)) - dot(x, state.y_row(j));
            sum += d * d;
        }
    }
    Ok(sum.sqrt() / T::of(n as f64))
}

fn cross_gram<T: Scalar>(a: &[T], b: &[T], n: usize, r: usize) -> Vec<T> {
    let mut g = vec![T::zero(); r * r];
    for i in 0..n {
        let (ra, rb) = (&a[i * r..(i + 1) * r], &b[i * r..(i + 1) * r]);
        for k in 0..r {
            for l in 0..r {
                g[k * r + l] += ra[k] * rb[l];
            }
        }
    }
    g
}

/// Same quantity as [`rms`] in `O(n r^2)` through the identity
/// `||A - B||^2 = ||A||^2 - 2<A, B> + ||B||^2` with every term evaluated from
/// `r x r` Gram matrices. Cancellation limits the absolute accuracy of the
/// squared error to a few ulps of `||M||_F^2`.
pub fn rms_fast<T: Scalar>(state: &FactorState<T>, inst: &Instance<T>) -> Result<T> {
    check_dims(state, inst)?;
    let (n, r) = (inst.n(), inst.rank());
    if n == 0 {
        return Ok(T::zero());
    }
    let aa = cross_gram(inst.alpha(), inst.alpha(), n, r);
    let bb = cross_gram(inst.beta(), inst.beta(), n, r);
    let ax = cross_gram(inst.alpha(), state.x(), n, r);
    let by = cross_gram(inst.beta(), state.y(), n, r);
    let xx = cross_gram(state.x(), state.x(), n, r);
    let yy = cross_gram(state.y(), state.y(), n, r);
    let frob = |p: &[T], q: &[T]| p.iter().zip(q).map(|(&u, &v)| u * v).sum::<T>();
    let sq = frob(&aa, &bb) - T::of(2.0) * frob(&ax, &by) + frob(&xx, &yy);
    Ok(sq.max(T::zero()).sqrt() / T::of(n as f64))
}

/// Sum of squared residuals over the observed entries only.
pub fn objective<T: Scalar>(state: &FactorState<T>, view: &ObservedView<'_, T>) -> Result<T> {
    let g = view.graph;
    if state.rank() != view.rank || state.n() != g.n_rows() || state.n() != g.n_cols() {
        return Err(Error::DimensionMismatch(
            "state does not match the observed problem".into(),
        ));
    }
    Ok(g.edges()
        .iter()
        .zip(view.values)
        .map(|(&(i, j), &m)| {
            let d = state.entry(i, j) - m;
            d * d
        })
        .sum())
}

/// `1 - (u^T v / (|u| |v|))^2`, the rank-1 subspace distance.
pub fn subspace_distance<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::InvalidArgument(
            "subspace distance of a zero vector".into(),
        ));
    }
    let cos = dot(u, v) / (nu * nv);
    Ok((T::one() - cos * cos).max(T::zero()))
}

/// `max(w) - min(w)`.
pub fn spread<T: Scalar>(w: &[T]) -> Result<T> {
    let (lo, hi) = envelope(w)?;
    Ok(hi - lo)
}

/// `(min(w), max(w))`.
pub fn envelope<T: Scalar>(w: &[T]) -> Result<(T, T)> {
    let first = *w
        .first()
        .ok_or_else(|| Error::InvalidArgument("spread of an empty vector".into()))?;
    Ok(w.iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T> {
    pub rms: T,
    pub objective: T,
    /// Rank 1 only.
    pub subspace_dist_x: Option<T>,
    pub subspace_dist_y: Option<T>,
    /// Spread of `x_i / alpha_i`; rank 1 with non-zero factors only.
    pub spread_u: Option<T>,
    pub spread_v: Option<T>,
}

pub fn report<T: Scalar>(state: &FactorState<T>, inst: &Instance<T>) -> Result<MetricReport<T>> {
    let rms = rms(state, inst)?;
    let objective = objective(state, &inst.view())?;
    let rank1 = inst.rank() == 1 && inst.n() > 0;
    let ratio_spread = |num: &[T], den: &[T]| -> Option<T> {
        if !rank1 || den.iter().any(|&d| d == T::zero()) {
            return None;
        }
        let ratios: Vec<T> = num.iter().zip(den).map(|(&a, &b)| a / b).collect();
        spread(&ratios).ok()
    };
    Ok(MetricReport {
        rms,
        objective,
        subspace_dist_x: rank1
            .then(|| subspace_distance(state.x(), inst.alpha()).ok())
            .flatten(),
        subspace_dist_y: rank1
            .then(|| subspace_distance(state.y(), inst.beta()).ok())
            .flatten(),
        spread_u: ratio_spread(state.x(), inst.alpha()),
        spread_v: ratio_spread(state.y(), inst.beta()),
    })
}

//! Small dense kernels for the per-vertex normal equations.

use crate::scalar::Scalar;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric `r x r` matrix (row-major) by cyclic
/// Jacobi rotations. Returns `(eigenvalues, eigenvectors)` with eigenvector
/// `k` stored in column `k` of the row-major output.
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], r: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(matrix.len(), r * r, "matrix must be r x r");
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); r * r];
    symmetric_eigen_scratch(&mut a, &mut v, r);
    let values = (0..r).map(|k| a[k * r + k]).collect();
    (values, v)
}

/// In-place Jacobi iteration: on return the diagonal of `a` holds the
/// eigenvalues and the columns of `v` the eigenvectors.
pub fn symmetric_eigen_scratch<T: Scalar>(a: &mut [T], v: &mut [T], r: usize) {
    debug_assert!(a.len() == r * r && v.len() == r * r);
    v.iter_mut().for_each(|e| *e = T::zero());
    for k in 0..r {
        v[k * r + k] = T::one();
    }
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut diag = T::zero();
        for p in 0..r {
            diag += a[p * r + p] * a[p * r + p];
            for q in (p + 1)..r {
                off += a[p * r + q] * a[p * r + q];
            }
        }
        if off == T::zero() || off <= eps * eps * diag {
            break;
        }
        for p in 0..r {
            for q in (p + 1)..r {
                let apq = a[p * r + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * r + q] - a[p * r + p]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..r {
                    let akp = a[k * r + p];
                    let akq = a[k * r + q];
                    a[k * r + p] = c * akp - s * akq;
                    a[k * r + q] = s * akp + c * akq;
                }
                for k in 0..r {
                    let apk = a[p * r + k];
                    let aqk = a[q * r + k];
                    a[p * r + k] = c * apk - s * aqk;
                    a[q * r + k] = s * apk + c * aqk;
                }
                for k in 0..r {
                    let vkp = v[k * r + p];
                    let vkq = v[k * r + q];
                    v[k * r + p] = c * vkp - s * vkq;
                    v[k * r + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

/// Minimal-norm solution of the symmetric positive semi-definite system
/// `gram * x = rhs`, i.e. `pinv(gram) * rhs` with eigenvalues at or below
/// [`RANK_THRESHOLD`] times the largest one discarded.
pub fn solve_psd_min_norm<T: Scalar>(gram: &[T], rhs: &[T], r: usize) -> Vec<T> {
    assert_eq!(gram.len(), r * r);
    assert_eq!(rhs.len(), r);
    let mut a = gram.to_vec();
    let mut v = vec![T::zero(); r * r];
    symmetric_eigen_scratch(&mut a, &mut v, r);
    let mut x = vec![T::zero(); r];
    solve_psd_min_norm_into(&a, &v, rhs, r, &mut x);
    x
}

/// Second half of [`solve_psd_min_norm`], given the output of
/// [`symmetric_eigen_scratch`].
pub fn solve_psd_min_norm_into<T: Scalar>(
    diagonalized: &[T],
    vectors: &[T],
    rhs: &[T],
    r: usize,
    out: &mut [T],
) {
    out.iter_mut().for_each(|e| *e = T::zero());
    let largest = (0..r).fold(T::zero(), |m, k| m.max(diagonalized[k * r + k].abs()));
    if largest == T::zero() {
        return;
    }
    let cutoff = largest * T::of(RANK_THRESHOLD);
    for k in 0..r {
        let lambda = diagonalized[k * r + k];
        if lambda <= cutoff {
            continue;
        }
        let coeff = (0..r).map(|i| vectors[i * r + k] * rhs[i]).sum::<T>() / lambda;
        for i in 0..r {
            out[i] += coeff * vectors[i * r + k];
        }
    }
}

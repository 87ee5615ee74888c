//! Small dense least squares by Householder QR.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative size of a pivot below which a column counts as degenerate.
pub const RANK_TOL: f64 = 1e-10;

/// Solves `min |A c − b|` for a row-major `rows × cols` matrix `A`.
///
/// Fails with the index of the first column whose pivot collapses, so
/// callers can name the degenerate basis function.
pub fn lstsq<T: Scalar>(a: &[T], rows: usize, cols: usize, b: &[T]) -> std::result::Result<Vec<T>, usize> {
    assert_eq!(a.len(), rows * cols, "matrix size");
    assert_eq!(b.len(), rows, "right-hand side size");
    assert!(rows >= cols, "least squares needs rows >= cols");
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let at = |i: usize, j: usize| i * cols + j;

    // column scales, for a scale-free rank test
    let norms: Vec<T> = (0..cols)
        .map(|j| (0..rows).map(|i| m[at(i, j)] * m[at(i, j)]).sum::<T>().sqrt())
        .collect();

    for j in 0..cols {
        let norm = (j..rows).map(|i| m[at(i, j)] * m[at(i, j)]).sum::<T>().sqrt();
        if !(norm > T::lit(RANK_TOL) * norms[j]) || norms[j] == T::zero() {
            return Err(j);
        }
        let alpha = if m[at(j, j)] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (j..rows).map(|i| m[at(i, j)]).collect();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 > T::zero() {
            for c in j..cols {
                let dot: T = (j..rows).map(|i| v[i - j] * m[at(i, c)]).sum();
                let f = (dot + dot) / vnorm2;
                for i in j..rows {
                    m[at(i, c)] = m[at(i, c)] - f * v[i - j];
                }
            }
            let dot: T = (j..rows).map(|i| v[i - j] * rhs[i]).sum();
            let f = (dot + dot) / vnorm2;
            for i in j..rows {
                rhs[i] = rhs[i] - f * v[i - j];
            }
        }
    }
    let mut x = vec![T::zero(); cols];
    for j in (0..cols).rev() {
        let mut acc = rhs[j];
        for c in j + 1..cols {
            acc = acc - m[at(j, c)] * x[c];
        }
        x[j] = acc / m[at(j, j)];
    }
    Ok(x)
}

/// Least squares against named basis columns; rank failures name the basis.
pub fn fit_basis<T: Scalar>(names: &[&str], a: &[T], b: &[T]) -> Result<Vec<T>> {
    let cols = names.len();
    let rows = b.len();
    if rows < cols {
        return Err(Error::Fit(format!("{rows} samples for {cols} basis functions")));
    }
    lstsq(a, rows, cols, b).map_err(|j| Error::Fit(format!("rank-deficient design: basis `{}` is degenerate", names[j])))
}

/// Chebyshev points of the first kind on `[lo, hi]`, ascending.
pub fn chebyshev_nodes<T: Scalar>(count: usize, lo: T, hi: T) -> Vec<T> {
    let mid = (lo + hi) * T::lit(0.5);
    let half = (hi - lo) * T::lit(0.5);
    (0..count)
        .rev()
        .map(|k| {
            let theta = T::PI() * T::from_count(2 * k + 1) / T::from_count(2 * count);
            mid + half * theta.cos()
        })
        .collect()
}

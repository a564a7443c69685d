//! Small dense kernels for the interior-point solver.

/// In-place Cholesky of a symmetric positive definite `n x n` row-major
/// matrix; the lower triangle receives the factor. Returns `false` when a
/// pivot is not positive.
pub(crate) fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    true
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Factors `a`, retrying with a growing diagonal shift when it is only
/// positive semidefinite up to rounding.
pub(crate) fn cholesky_regularized(a: &[f64], n: usize, work: &mut Vec<f64>) -> bool {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        work.clear();
        work.extend_from_slice(a);
        for i in 0..n {
            work[i * n + i] += shift;
        }
        if cholesky(work, n) {
            return true;
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    false
}

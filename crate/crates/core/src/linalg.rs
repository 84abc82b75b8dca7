//! Small dense-vector helpers shared by the plain and taped execution paths.
//!
//! Both paths must produce bit-identical forwards, so they call the same
//! routines with the same accumulation order.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::seed;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// y = W x for a row-major flat matrix W of shape (rows, cols).
pub fn matvec_flat(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        out.push(dot(&w[r * cols..(r + 1) * cols], x));
    }
    out
}

/// Stabilized log(sum(exp(x_i))).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let mut m = xs[0];
    for &x in &xs[1..] {
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for &x in xs {
        s += (x - m).exp();
    }
    m + s.ln()
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Orthonormalize `count` seeded Gaussian draws in R^dim by modified
/// Gram-Schmidt with one re-orthogonalization pass.
pub fn seeded_orthonormal(rng: &mut impl RngCore, count: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    if count > dim {
        return Err(Error::InvalidArgument(format!(
            "cannot build {count} orthonormal vectors in dimension {dim}"
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = seed::normal_vec(rng, dim);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for i in 0..dim {
                    v[i] -= c * b[i];
                }
            }
        }
        let n = norm(&v);
        if n < 1e-8 {
            // Degenerate draw; extremely unlikely, just redraw.
            continue;
        }
        for x in &mut v {
            *x /= n;
        }
        basis.push(v);
    }
    Ok(basis)
}

//! Small dense helpers: power iteration and block stacking.

use crate::rng::SeededRng;
use crate::{Error, Matrix, Result, Vector};

const POWER_START_SEED: u64 = 0x5eed;

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator given as
/// a matrix-vector product closure.
///
/// Stops once successive Rayleigh quotients differ by at most
/// `tol * max(1, |λ|)`. Returns the last estimate even if `max_iters` is hit;
/// callers decide whether non-convergence is an error.
pub fn power_iteration<F>(apply: F, start: Vector, max_iters: usize, tol: f64) -> PowerEstimate
where
    F: Fn(&Vector) -> Vector,
{
    let mut v = start;
    let norm = v.norm();
    if norm == 0.0 {
        return PowerEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    v /= norm;
    let mut lambda = v.dot(&apply(&v));
    for it in 1..=max_iters {
        let w = apply(&v);
        let wn = w.norm();
        if wn == 0.0 {
            return PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        v = w / wn;
        let next = v.dot(&apply(&v));
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return PowerEstimate {
                value: next,
                iterations: it,
                converged: true,
            };
        }
        lambda = next;
    }
    PowerEstimate {
        value: lambda,
        iterations: max_iters,
        converged: false,
    }
}

/// Deterministic start vector with entries drawn from `U[1, 2)` by a fixed
/// seed.
///
/// Structured sequences can be exactly orthogonal to the top eigenvector of
/// graphs with a dominating vertex.
pub fn power_start(n: usize) -> Vector {
    let mut rng = SeededRng::new(POWER_START_SEED);
    Vector::from_fn(n, |_, _| rng.uniform(1.0, 2.0))
}

/// Largest singular value `‖B‖₂` by power iteration on `BᵀB`.
///
/// The start vector is [`power_start`], so the result is deterministic.
pub fn spectral_norm(b: &Matrix, max_iters: usize, tol: f64) -> f64 {
    if b.ncols() == 0 || b.nrows() == 0 {
        return 0.0;
    }
    let est = power_iteration(|v| b.tr_mul(&(b * v)), power_start(b.ncols()), max_iters, tol);
    est.value.max(0.0).sqrt()
}

/// `spectral_norm` with the defaults used for declared Lipschitz constants
/// (50 iterations, tolerance 1e-10).
pub fn spectral_norm_default(b: &Matrix) -> f64 {
    spectral_norm(b, 50, 1e-10)
}

/// Concatenate blocks into one vector.
pub fn stack<'a, I>(blocks: I) -> Vector
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut out = Vec::new();
    for b in blocks {
        out.extend_from_slice(b.as_slice());
    }
    Vector::from_vec(out)
}

/// Split `v` into consecutive blocks with the given sizes.
pub fn split(v: &Vector, sizes: &[usize]) -> Result<Vec<Vector>> {
    let total: usize = sizes.iter().sum();
    if total != v.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: v.len(),
        });
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut off = 0;
    for &s in sizes {
        out.push(Vector::from_column_slice(&v.as_slice()[off..off + s]));
        off += s;
    }
    Ok(out)
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

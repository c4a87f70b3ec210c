//! Active-set nonnegative least squares (Lawson–Hanson).
//!
//! Minimizes `‖A x − b‖₂` subject to `x ≥ 0`. Variables enter the passive set
//! by largest dual value with ties broken toward the lowest index, so the
//! solution path is deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the dual feasibility test.
pub const DUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `‖A x − b‖₂`.
    pub residual_norm: f64,
    /// Inner least-squares solves performed.
    pub iterations: usize,
    /// False when the iteration cap stopped the solver early.
    pub converged: bool,
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.len(),
        });
    }
    let col_scale = (0..n).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    let tol = DUAL_TOL * (col_scale * b.norm()).max(f64::MIN_POSITIVE);

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    // columns that failed to enter at the current x
    let mut blocked = vec![false; n];
    let mut iterations = 0;

    loop {
        let w = a.tr_mul(&(b - a * &x));
        let mut entering = None;
        let mut best = tol;
        for j in 0..n {
            if !passive[j] && !blocked[j] && w[j] > best {
                best = w[j];
                entering = Some(j);
            }
        }
        let Some(j) = entering else {
            return Ok(finish(a, b, x, iterations, true));
        };
        passive[j] = true;
        let mut first_inner = true;

        loop {
            if iterations >= max_iter {
                return Ok(finish(a, b, x, iterations, false));
            }
            iterations += 1;
            let z = solve_passive(a, b, &passive);
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|f| *f = false);
                break;
            }
            if first_inner && z[j] <= 0.0 {
                // entering column is numerically dependent on the passive ones
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first_inner = false;
            let mut alpha = f64::INFINITY;
            for i in 0..n {
                if passive[i] && z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            x += (&z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= f64::EPSILON * x.amax().max(1.0) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            blocked.iter_mut().for_each(|f| *f = false);
        }
    }
}

fn finish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: DVector<f64>,
    iterations: usize,
    converged: bool,
) -> NnlsSolution {
    let residual_norm = (a * &x - b).norm();
    NnlsSolution {
        x,
        residual_norm,
        iterations,
        converged,
    }
}

/// Unconstrained least squares restricted to the passive columns; zeros elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = a.select_columns(&idx);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let sol = svd.solve(b, eps).expect("svd computed with both factors");
    let mut z = DVector::zeros(passive.len());
    for (k, &i) in idx.iter().enumerate() {
        z[i] = sol[k];
    }
    z
}

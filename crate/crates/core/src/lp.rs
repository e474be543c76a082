//! Dense primal simplex for `max cᵀy  s.t.  A y ≤ b, y ≥ 0` with `b ≥ 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Bland's rule makes the pivot sequence finite under degeneracy.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    /// Optimal primal point `y`.
    pub y: Vec<f64>,
    /// Shadow prices of the `A y ≤ b` rows: an optimal point of the dual
    /// `min bᵀx  s.t.  Aᵀx ≥ c, x ≥ 0`.
    pub dual: Vec<f64>,
}

/// `a` is row-major with `b.len()` rows and `c.len()` columns.
pub fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let rows = b.len();
    let cols = c.len();
    if a.len() != rows || a.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("LP matrix shape mismatch".into()));
    }
    if b.iter().any(|&v| v < -EPS) {
        return Err(Error::InvalidArgument("LP right-hand side must be nonnegative".into()));
    }
    let width = cols + rows + 1;
    let mut t = vec![vec![0.0; width]; rows + 1];
    for i in 0..rows {
        t[i][..cols].copy_from_slice(&a[i]);
        t[i][cols + i] = 1.0;
        t[i][width - 1] = b[i].max(0.0);
    }
    for j in 0..cols {
        t[rows][j] = -c[j];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let max_pivots = 50_000usize;
    for _ in 0..max_pivots {
        let Some(enter) = (0..cols + rows).find(|&j| t[rows][j] < -EPS) else {
            let mut y = vec![0.0; cols];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < cols {
                    y[bv] = t[i][width - 1];
                }
            }
            let dual = (0..rows).map(|i| t[rows][cols + i]).collect();
            return Ok(LpSolution {
                objective: t[rows][width - 1],
                y,
                dual,
            });
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..rows {
            let coef = t[i][enter];
            if coef > EPS {
                let ratio = t[i][width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::Internal("LP is unbounded".into()));
        };
        let pivot = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    for (x, p) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                }
            }
        }
        basis[r] = enter;
    }
    Err(Error::Internal("LP pivot limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        let s = maximize(&a, &[4.0, 12.0, 18.0], &[3.0, 5.0]).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.y[0] - 2.0).abs() < 1e-9 && (s.y[1] - 6.0).abs() < 1e-9);
        // strong duality
        let dual_obj: f64 = s.dual.iter().zip([4.0, 12.0, 18.0]).map(|(x, b)| x * b).sum();
        assert!((dual_obj - 36.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_instance_terminates() {
        let a = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![1.0, 0.0]];
        let s = maximize(&a, &[0.0, 0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(s.objective.abs() < 1e-12);
    }
}

//! Dense two-phase simplex for the small linear programs in this crate:
//! matrix games, hull-membership margins, and transience certificates.
//!
//! Solves max c.x subject to A x <= b, x >= 0 (b of any sign). Bland's rule
//! is used throughout, so the method terminates on degenerate programs. All
//! programs here have at most a few dozen rows and columns; no sparsity or
//! revised-method machinery is warranted.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-1 residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("non-finite coefficient in linear program")]
    BadInput,
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

const EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

struct Tableau {
    /// m rows of [columns..., rhs], rhs kept nonnegative.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize, reduced: &mut [f64], obj: &mut f64) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = reduced[col];
        if f != 0.0 {
            for (v, pv) in reduced.iter_mut().zip(&pivot_row[..self.ncols]) {
                *v -= f * pv;
            }
            reduced[col] = 0.0;
            *obj += f * pivot_row[self.ncols];
        }
        self.basis[row] = col;
    }

    /// Runs simplex on the current reduced-cost row (maximization). `allowed`
    /// marks columns eligible to enter the basis.
    fn optimize(
        &mut self,
        reduced: &mut [f64],
        obj: &mut f64,
        allowed: &[bool],
        max_iter: usize,
    ) -> Result<(), LpError> {
        for _ in 0..max_iter {
            // Bland: smallest improving column index.
            let enter = (0..self.ncols).find(|&j| allowed[j] && reduced[j] > EPS);
            let Some(col) = enter else { return Ok(()) };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rows[i][self.ncols] / a;
                    let better = match best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < br - EPS
                                || (ratio <= br + EPS && self.basis[i] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col, reduced, obj);
        }
        Err(LpError::IterationLimit)
    }
}

/// Maximizes c.x subject to a_rows x <= b, x >= 0.
pub fn solve_lp_max(c: &[f64], a_rows: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = a_rows.len();
    if a_rows.len() != b.len() || a_rows.iter().any(|r| r.len() != n) {
        return Err(LpError::BadInput);
    }
    let finite = c
        .iter()
        .chain(b)
        .chain(a_rows.iter().flatten())
        .all(|v| v.is_finite());
    if !finite {
        return Err(LpError::BadInput);
    }

    // Column layout: [structural n][slack m][artificial k][rhs].
    let n_art = b.iter().filter(|&&bi| bi < 0.0).count();
    let ncols = n + m + n_art;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = 0usize;
    for i in 0..m {
        let mut row = vec![0.0; ncols + 1];
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = flip * a_rows[i][j];
        }
        row[n + i] = flip;
        row[ncols] = flip * b[i];
        if b[i] < 0.0 {
            row[n + m + art] = 1.0;
            basis.push(n + m + art);
            art += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, basis, ncols };
    let max_iter = 2000 * (ncols + m + 8);

    if n_art > 0 {
        // Phase 1: maximize -(sum of artificials). Reduced costs relative to
        // the artificial basis are the column sums of the artificial rows.
        let mut reduced = vec![0.0; ncols];
        let mut obj = 0.0;
        for (i, row) in t.rows.iter().enumerate() {
            if t.basis[i] >= n + m {
                for (r, a) in reduced.iter_mut().zip(row) {
                    *r += a;
                }
                obj -= row[ncols];
            }
        }
        reduced[n + m..].fill(0.0);
        let allowed = vec![true; ncols];
        t.optimize(&mut reduced, &mut obj, &allowed, max_iter)?;
        if obj < -FEAS_EPS {
            return Err(LpError::Infeasible(-obj));
        }
        // Drive any zero-valued artificial out of the basis when possible.
        for i in 0..m {
            if t.basis[i] >= n + m {
                if let Some(col) = (0..n + m).find(|&j| t.rows[i][j].abs() > EPS) {
                    let mut dummy = vec![0.0; ncols];
                    let mut dv = 0.0;
                    t.pivot(i, col, &mut dummy, &mut dv);
                }
            }
        }
    }

    // Phase 2: real objective; artificial columns may not re-enter.
    let mut reduced = vec![0.0; ncols];
    reduced[..n].copy_from_slice(c);
    let mut obj = 0.0;
    let cost_of = |col: usize| if col < n { c[col] } else { 0.0 };
    for (i, row) in t.rows.iter().enumerate() {
        let cb = cost_of(t.basis[i]);
        if cb != 0.0 {
            for (r, a) in reduced.iter_mut().zip(row) {
                *r -= cb * a;
            }
            obj += cb * row[ncols];
        }
    }
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(n + m) {
        *a = false;
    }
    t.optimize(&mut reduced, &mut obj, &allowed, max_iter)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rows[i][t.ncols];
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, value })
}

//! Dense two-phase revised simplex for equality-form problems.
//!
//! Solves `min c'x  s.t.  A x = b, x >= 0` with `b >= 0`, columns given
//! sparsely. Phase 1 starts from an all-artificial basis; redundant rows
//! (the transport constraints carry two dependencies) leave their artificial
//! basic at level zero with dual zero, which is exactly the dual the reduced
//! system would assign them.
//!
//! Pivoting is Dantzig by default and falls back to Bland's rule whenever a
//! run of degenerate pivots stalls the objective, which guarantees
//! termination on the heavily degenerate equal-weight transport instances.
//! The basis inverse is maintained by rank-one updates with a pivot
//! threshold of 1e-11 and refactorized from scratch when the primal residual
//! drifts.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const RC_TOL: f64 = 1e-9;
const STALL_LIMIT_FACTOR: usize = 3;
const MAX_ITER: usize = 200_000;

/// A column with at most a handful of nonzeros.
#[derive(Clone, Debug)]
pub(crate) struct SparseCol {
    pub entries: Vec<(u32, f64)>,
}

/// Equality-form LP with nonnegative right-hand side.
pub(crate) struct StandardLp {
    pub nrows: usize,
    pub cols: Vec<SparseCol>,
    pub costs: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub(crate) struct SimplexOut {
    pub objective: f64,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub degenerate: bool,
    pub iterations: usize,
}

struct Tableau<'a> {
    lp: &'a StandardLp,
    r: usize,
    /// Basis column ids; ids >= lp.cols.len() are artificials.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Row-major basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardLp) -> Self {
        let r = lp.nrows;
        let n = lp.cols.len();
        let mut binv = vec![0.0; r * r];
        for k in 0..r {
            binv[k * r + k] = 1.0;
        }
        let basis: Vec<usize> = (n..n + r).collect();
        let mut in_basis = vec![false; n + r];
        for &b in &basis {
            in_basis[b] = true;
        }
        Tableau { lp, r, basis, in_basis, binv, xb: lp.rhs.clone(), iterations: 0 }
    }

    fn n_original(&self) -> usize {
        self.lp.cols.len()
    }

    fn is_artificial(&self, id: usize) -> bool {
        id >= self.n_original()
    }

    fn col_dot(&self, row: &[f64], j: usize) -> f64 {
        self.lp.cols[j]
            .entries
            .iter()
            .map(|&(i, v)| row[i as usize] * v)
            .sum()
    }

    /// `B^{-1} A_j` for an original column.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let r = self.r;
        let mut d = vec![0.0; r];
        for &(i, v) in &self.lp.cols[j].entries {
            let i = i as usize;
            for k in 0..r {
                d[k] += self.binv[k * r + i] * v;
            }
        }
        d
    }

    fn duals(&self, costs: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let r = self.r;
        let mut lambda = vec![0.0; r];
        for k in 0..r {
            let c = costs(self.basis[k]);
            if c != 0.0 {
                let row = &self.binv[k * r..(k + 1) * r];
                for (l, v) in lambda.iter_mut().zip(row) {
                    *l += c * v;
                }
            }
        }
        lambda
    }

    /// Entering column by reduced cost. `bland` picks the first negative;
    /// otherwise the most negative wins.
    fn price(&self, lambda: &[f64], costs: &dyn Fn(usize) -> f64, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n_original() {
            if self.in_basis[j] {
                continue;
            }
            let rc = costs(j) - self.col_dot(lambda, j);
            if rc < -RC_TOL {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |(_, b)| rc < b) {
                    best = Some((j, rc));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Leaving row for the entering direction `d`. Returns `(row, theta)`.
    ///
    /// Two-pass ratio test: the first pass finds the tolerance-relaxed bound
    /// on the step, the second picks the numerically best pivot among rows
    /// whose exact ratio fits under it (Bland mode picks the lowest variable
    /// id instead, for its termination guarantee).
    fn ratio_test(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        // a basic artificial must never rise above zero: when a direction
        // touches one at a decent pivot, it leaves immediately at theta = 0
        // (redundant rows have d = 0 for every real column and never fire)
        let mut forced: Option<usize> = None;
        for k in 0..self.r {
            if self.is_artificial(self.basis[k])
                && self.xb[k].abs() <= PIVOT_TOL
                && d[k].abs() > 1e-7
                && forced.map_or(true, |f: usize| d[k].abs() > d[f].abs())
            {
                forced = Some(k);
            }
        }
        if let Some(k) = forced {
            return Some((k, 0.0));
        }

        const BAND: f64 = 1e-11;
        let mut theta_max = f64::INFINITY;
        for k in 0..self.r {
            if d[k] > PIVOT_TOL {
                theta_max = theta_max.min((self.xb[k].max(0.0) + BAND) / d[k]);
            }
        }
        if !theta_max.is_finite() {
            return None;
        }
        let mut leave: Option<usize> = None;
        for k in 0..self.r {
            if d[k] > PIVOT_TOL {
                let ratio = self.xb[k].max(0.0) / d[k];
                if ratio <= theta_max {
                    let better = match leave {
                        None => true,
                        Some(cur) => {
                            if bland {
                                self.basis[k] < self.basis[cur]
                            } else {
                                d[k] > d[cur]
                            }
                        }
                    };
                    if better {
                        leave = Some(k);
                    }
                }
            }
        }
        leave.map(|k| (k, self.xb[k].max(0.0) / d[k]))
    }

    fn pivot(&mut self, leave_row: usize, enter: usize, d: &[f64], theta: f64) {
        let r = self.r;
        for k in 0..r {
            if k != leave_row {
                self.xb[k] -= theta * d[k];
                if self.xb[k].abs() < 1e-15 {
                    self.xb[k] = 0.0;
                }
            }
        }
        self.xb[leave_row] = theta;

        let pivot = d[leave_row];
        let (head, tail) = self.binv.split_at_mut(leave_row * r);
        let (lrow, rest) = tail.split_at_mut(r);
        for v in lrow.iter_mut() {
            *v /= pivot;
        }
        for (k, row) in head.chunks_mut(r).enumerate() {
            let f = d[k];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(lrow.iter()) {
                    *a -= f * *b;
                }
            }
        }
        for (k0, row) in rest.chunks_mut(r).enumerate() {
            let f = d[leave_row + 1 + k0];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(lrow.iter()) {
                    *a -= f * *b;
                }
            }
        }

        let old = self.basis[leave_row];
        self.in_basis[old] = false;
        self.basis[leave_row] = enter;
        self.in_basis[enter] = true;
    }

    /// Rebuilds the basis inverse from scratch (partial-pivot Gauss-Jordan)
    /// and recomputes the basic values.
    fn refactorize(&mut self) -> Result<()> {
        let r = self.r;
        let n = self.n_original();
        // dense basis matrix
        let mut bmat = vec![0.0; r * r];
        for (k, &id) in self.basis.iter().enumerate() {
            if id < n {
                for &(i, v) in &self.lp.cols[id].entries {
                    bmat[(i as usize) * r + k] = v;
                }
            } else {
                bmat[(id - n) * r + k] = 1.0;
            }
        }
        let mut inv = vec![0.0; r * r];
        for k in 0..r {
            inv[k * r + k] = 1.0;
        }
        for col in 0..r {
            // partial pivot
            let mut p = col;
            for row in col + 1..r {
                if bmat[row * r + col].abs() > bmat[p * r + col].abs() {
                    p = row;
                }
            }
            if bmat[p * r + col].abs() < PIVOT_TOL {
                return Err(Error::Internal(format!("singular basis at column {col}")));
            }
            if p != col {
                for j in 0..r {
                    bmat.swap(col * r + j, p * r + j);
                    inv.swap(col * r + j, p * r + j);
                }
            }
            let piv = bmat[col * r + col];
            for j in 0..r {
                bmat[col * r + j] /= piv;
                inv[col * r + j] /= piv;
            }
            for row in 0..r {
                if row != col {
                    let f = bmat[row * r + col];
                    if f != 0.0 {
                        for j in 0..r {
                            bmat[row * r + j] -= f * bmat[col * r + j];
                            inv[row * r + j] -= f * inv[col * r + j];
                        }
                    }
                }
            }
        }
        // inv now holds B^{-1} in row-echelon order matching basis columns:
        // rows of inv correspond to basis positions
        self.binv = inv;
        let mut xb = vec![0.0; r];
        for k in 0..r {
            for i in 0..r {
                xb[k] += self.binv[k * r + i] * self.lp.rhs[i];
            }
        }
        self.xb = xb;
        Ok(())
    }

    /// Swaps each basic artificial for the real column with the largest
    /// pivot on its row, when one exists above a safe threshold.
    fn drive_out_artificials(&mut self) {
        let r = self.r;
        for k in 0..r {
            if !self.is_artificial(self.basis[k]) || self.xb[k].abs() > PIVOT_TOL {
                continue;
            }
            let row: Vec<f64> = self.binv[k * r..(k + 1) * r].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_original() {
                if self.in_basis[j] {
                    continue;
                }
                let v = self.col_dot(&row, j);
                if v.abs() > 1e-7 && best.map_or(true, |(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let d = self.ftran(j);
                self.pivot(k, j, &d, 0.0);
            }
        }
    }

    fn primal_residual(&self) -> f64 {
        let r = self.r;
        let n = self.n_original();
        let mut ax = vec![0.0; r];
        for (k, &id) in self.basis.iter().enumerate() {
            let v = self.xb[k];
            if v == 0.0 {
                continue;
            }
            if id < n {
                for &(i, c) in &self.lp.cols[id].entries {
                    ax[i as usize] += c * v;
                }
            } else {
                ax[id - n] += v;
            }
        }
        ax.iter()
            .zip(&self.lp.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Runs the simplex loop to optimality for the given cost functional.
    fn optimize(&mut self, costs: &dyn Fn(usize) -> f64) -> Result<()> {
        let mut bland = false;
        let mut stall = 0usize;
        let stall_limit = STALL_LIMIT_FACTOR * self.r + 16;
        loop {
            if self.iterations >= MAX_ITER {
                return Err(Error::NoConvergence {
                    what: "simplex",
                    detail: format!("{MAX_ITER} iterations"),
                });
            }
            let lambda = self.duals(costs);
            let Some(enter) = self.price(&lambda, costs, bland) else {
                return Ok(());
            };
            let d = self.ftran(enter);
            let Some((leave_row, theta)) = self.ratio_test(&d, bland) else {
                return Err(Error::Internal("unbounded direction in a transport polytope".into()));
            };
            let pivot_mag = d[leave_row].abs();
            self.pivot(leave_row, enter, &d, theta);
            self.iterations += 1;
            if theta <= 1e-13 {
                stall += 1;
                if stall >= stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            // small pivots and long update chains both erode the inverse
            if pivot_mag < 1e-6
                || self.iterations % 512 == 0
                || (self.iterations % 128 == 0 && self.primal_residual() > 1e-10)
            {
                self.refactorize()?;
            }
        }
    }
}

/// Minimizes `c'x` over `Ax = b, x >= 0`.
pub(crate) fn solve_min(lp: &StandardLp) -> Result<SimplexOut> {
    if lp.rhs.iter().any(|&b| b < 0.0) {
        return Err(Error::Internal("standard form needs b >= 0".into()));
    }
    if lp.costs.len() != lp.cols.len() {
        return Err(Error::Internal("cost vector length mismatch".into()));
    }
    let n = lp.cols.len();
    let mut t = Tableau::new(lp);

    // phase 1: minimize the artificial mass
    let phase1 = move |j: usize| if j >= n { 1.0 } else { 0.0 };
    t.optimize(&phase1)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&id, _)| id >= n)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    if infeasibility > 1e-9 {
        return Err(Error::Infeasible(format!(
            "phase-1 optimum {infeasibility:.3e} above tolerance"
        )));
    }

    // drive surviving artificials out of the basis on the best available
    // pivot; rows where every real column has a zero entry are redundant and
    // keep their artificial pinned at level zero with dual zero
    t.drive_out_artificials();

    // phase 2 on the true costs; artificials keep cost zero and stay barred
    // from entering, so surviving redundant-row artificials pin their duals
    // to zero
    let costs = lp.costs.clone();
    let phase2 = move |j: usize| if j >= n { 0.0 } else { costs[j] };
    t.optimize(&phase2)?;

    if t.primal_residual() > 1e-9 {
        t.refactorize()?;
        t.optimize(&phase2)?;
    }

    let mut x = vec![0.0; n];
    let mut degenerate = false;
    for (k, &id) in t.basis.iter().enumerate() {
        if t.xb[k].abs() <= PIVOT_TOL {
            degenerate = true;
        }
        if id < n {
            x[id] = t.xb[k].max(0.0);
        }
    }
    let duals = t.duals(&phase2);
    let objective = x.iter().zip(&lp.costs).map(|(xi, ci)| xi * ci).sum();
    Ok(SimplexOut { objective, x, duals, degenerate, iterations: t.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(entries: &[(u32, f64)]) -> SparseCol {
        SparseCol { entries: entries.to_vec() }
    }

    #[test]
    fn tiny_lp_with_known_solution() {
        // min -x1 - 2 x2  s.t.  x1 + x2 + s1 = 4,  x1 + 3 x2 + s2 = 6
        let lp = StandardLp {
            nrows: 2,
            cols: vec![
                col(&[(0, 1.0), (1, 1.0)]),
                col(&[(0, 1.0), (1, 3.0)]),
                col(&[(0, 1.0)]),
                col(&[(1, 1.0)]),
            ],
            costs: vec![-1.0, -2.0, 0.0, 0.0],
            rhs: vec![4.0, 6.0],
        };
        let out = solve_min(&lp).unwrap();
        // optimum at x1 = 3, x2 = 1: objective -5
        assert!((out.objective + 5.0).abs() < 1e-9, "got {}", out.objective);
        assert!((out.x[0] - 3.0).abs() < 1e-9);
        assert!((out.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows_are_harmless() {
        // x1 + x2 = 1 stated twice
        let lp = StandardLp {
            nrows: 2,
            cols: vec![col(&[(0, 1.0), (1, 1.0)]), col(&[(0, 1.0), (1, 1.0)])],
            costs: vec![1.0, 2.0],
            rhs: vec![1.0, 1.0],
        };
        let out = solve_min(&lp).unwrap();
        assert!((out.objective - 1.0).abs() < 1e-9);
        assert!((out.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x1 = 1 and x1 = 2
        let lp = StandardLp {
            nrows: 2,
            cols: vec![col(&[(0, 1.0), (1, 1.0)])],
            costs: vec![1.0],
            rhs: vec![1.0, 2.0],
        };
        assert!(matches!(solve_min(&lp), Err(Error::Infeasible(_))));
    }

    #[test]
    fn duals_satisfy_strong_duality() {
        let lp = StandardLp {
            nrows: 2,
            cols: vec![
                col(&[(0, 1.0), (1, 2.0)]),
                col(&[(0, 1.0), (1, -1.0)]),
                col(&[(0, 2.0), (1, 1.0)]),
            ],
            costs: vec![3.0, 1.0, 4.0],
            rhs: vec![2.0, 1.0],
        };
        let out = solve_min(&lp).unwrap();
        let dual_obj: f64 = out.duals.iter().zip(&lp.rhs).map(|(l, b)| l * b).sum();
        assert!((dual_obj - out.objective).abs() < 1e-9);
        // dual feasibility: reduced costs nonnegative
        for (j, c) in lp.costs.iter().enumerate() {
            let rc = c - lp.cols[j]
                .entries
                .iter()
                .map(|&(i, v)| out.duals[i as usize] * v)
                .sum::<f64>();
            assert!(rc > -1e-9, "column {j} has rc {rc}");
        }
    }
}

//! Dense two-phase tableau simplex for small LPs.
//!
//! Minimizes `c·x` subject to rows `a·x {≤,≥,=} b` and `x ≥ 0`. Dantzig's
//! rule is used until a run of degenerate pivots, then Bland's rule, which
//! cannot cycle. The tableau is recomputed from the original rows every few
//! pivots and before any optimal or unbounded verdict.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// `duals[i]` is the multiplier of constraint `i`: reduced costs are
    /// `c - Aᵀ duals ≥ 0` at the optimum. Rows dropped as redundant get 0.
    Optimal { x: Vec<f64>, value: f64, duals: Vec<f64> },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-11;
/// Smallest tableau entry accepted as a pivot.
const PIVOT_TOL: f64 = 1e-9;
/// Primal infeasibility tolerated by the ratio test.
const FEAS_TOL: f64 = 1e-10;
const DEGENERATE_SWITCH: usize = 50;
/// Pivots between refactorizations of the tableau.
const REFACTOR_EVERY: usize = 25;

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram { objective, constraints: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.objective.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Lp(format!("row {i} has {} coefficients, expected {n}", c.coeffs.len())));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|x| !x.is_finite()) {
                return Err(Error::Lp(format!("row {i} has non-finite entries")));
            }
        }
        Tableau::build(self).run(&self.objective, n)
    }
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// The rows as built, before any pivot; used to refactorize.
    orig: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    artificial_start: usize,
    /// Pivots since the tableau was last recomputed from `orig`.
    dirty: usize,
    /// Constraint index of each row, and whether it was negated.
    row_id: Vec<usize>,
    flipped: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.objective.len();
        let m = lp.constraints.len();
        // Normalize to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|x| -x).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let cols = n + slacks + artificials;
        let artificial_start = n + slacks;
        let mut t = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, artificial_start);
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            t[i][..n].copy_from_slice(&coeffs);
            t[i][cols] = rhs;
            match rel {
                Relation::Le => {
                    t[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        let flipped = lp.constraints.iter().map(|c| c.rhs < 0.0).collect();
        Tableau { orig: t.clone(), t, basis, cols, artificial_start, dirty: 0, row_id: (0..m).collect(), flipped }
    }

    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut r: Vec<f64> = (0..=self.cols).map(|j| if j < allowed { cost[j] } else { 0.0 }).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (rj, tj) in r.iter_mut().zip(&self.t[i]) {
                    *rj -= cb * tj;
                }
            }
        }
        r
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        self.t[row].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
                r[col] = 0.0;
            }
        }
        for r in self.t.iter_mut() {
            let rhs = &mut r[self.cols];
            if *rhs < 0.0 && *rhs > -FEAS_TOL {
                *rhs = 0.0;
            }
        }
        self.basis[row] = col;
        self.dirty += 1;
    }

    /// Recompute the tableau as `B⁻¹ [A | b]` from the original rows, which
    /// discards the rounding accumulated by the pivots. Keeps the current
    /// tableau if the basis matrix is numerically singular.
    fn refactor(&mut self) {
        if self.dirty == 0 {
            return;
        }
        let m = self.t.len();
        let b = DMatrix::from_fn(m, m, |i, k| self.orig[i][self.basis[k]]);
        let rhs = DMatrix::from_fn(m, self.cols + 1, |i, j| self.orig[i][j]);
        if let Some(x) = b.lu().solve(&rhs) {
            if x.iter().all(|v| v.is_finite()) {
                for (i, row) in self.t.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = x[(i, j)];
                    }
                    row[self.basis[i]] = 1.0;
                }
                for (i, &bi) in self.basis.iter().enumerate() {
                    for (k, row) in self.t.iter_mut().enumerate() {
                        if k != i {
                            row[bi] = 0.0;
                        }
                    }
                }
                for row in self.t.iter_mut() {
                    let rhs = &mut row[self.cols];
                    if *rhs < 0.0 && *rhs > -1e-12 {
                        *rhs = 0.0;
                    }
                }
            }
        }
        self.dirty = 0;
    }

    /// Solve `Bᵀ y = c_B` and map `y` back to the constraints as given.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.t.len();
        let mut out = vec![0.0; self.flipped.len()];
        let bt = DMatrix::from_fn(m, m, |k, i| self.orig[i][self.basis[k]]);
        let cb = nalgebra::DVector::from_fn(m, |k, _| cost[self.basis[k]]);
        if let Some(y) = bt.lu().solve(&cb) {
            for (i, &id) in self.row_id.iter().enumerate() {
                out[id] = if self.flipped[id] { -y[i] } else { y[i] };
            }
        }
        out
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.t).map(|(&b, r)| cost[b] * r[self.cols]).sum()
    }

    /// Harris two-pass ratio test: bound the step with a small feasibility
    /// allowance, then take the largest pivot among rows within the bound.
    /// Under Bland's rule ties go to the lowest basic index instead.
    fn ratio_test(&self, col: usize, bland: bool) -> Option<usize> {
        let rhs = self.cols;
        let bound = self
            .t
            .iter()
            .filter(|r| r[col] > PIVOT_TOL)
            .map(|r| (r[rhs].max(0.0) + FEAS_TOL) / r[col])
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for (i, r) in self.t.iter().enumerate() {
            let a = r[col];
            if a <= PIVOT_TOL || r[rhs].max(0.0) / a > bound {
                continue;
            }
            let better = match best {
                None => true,
                Some(l) if bland => self.basis[i] < self.basis[l],
                Some(l) => a > self.t[l][col],
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    /// Optimize `cost` over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        let mut stalled = 0;
        let mut bland = false;
        let mut best_value = f64::INFINITY;
        let max_pivots = 50_000 + 100 * (self.cols + self.t.len());
        for _ in 0..max_pivots {
            if self.dirty >= REFACTOR_EVERY {
                self.refactor();
            }
            let r = self.reduced_costs(cost, allowed);
            // Stalling is judged by objective progress; rounding makes
            // degenerate steps look like tiny positive ones. Once switched,
            // Bland's rule stays on.
            bland |= stalled >= DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = -EPS;
            for (j, &rj) in r.iter().enumerate().take(allowed) {
                if rj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rj;
                }
            }
            let Some(col) = enter else {
                // Confirm optimality on a freshly factorized tableau.
                if self.dirty > 0 {
                    self.refactor();
                    continue;
                }
                return true;
            };
            let Some(row) = self.ratio_test(col, bland) else {
                if self.dirty > 0 {
                    self.refactor();
                    continue;
                }
                return false;
            };
            self.pivot(row, col);
            let value = self.objective_value(cost);
            if value < best_value - 1e-11 * (1.0 + best_value.abs()) {
                best_value = value;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        log::warn!("simplex pivot limit reached");
        true
    }

    fn run(mut self, objective: &[f64], n: usize) -> Result<LpOutcome> {
        let scale = self.t.iter().map(|r| r[self.cols].abs()).fold(1.0, f64::max);
        if self.artificial_start < self.cols {
            let phase1: Vec<f64> = (0..self.cols).map(|j| if j >= self.artificial_start { 1.0 } else { 0.0 }).collect();
            self.optimize(&phase1, self.cols);
            let infeas: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|&(_, &b)| b >= self.artificial_start)
                .map(|(i, _)| self.t[i][self.cols])
                .sum();
            if infeas > 1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis or drop redundant rows.
            let mut i = 0;
            while i < self.t.len() {
                if self.basis[i] >= self.artificial_start {
                    let (j, size) = (0..self.artificial_start)
                        .map(|j| (j, self.t[i][j].abs()))
                        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
                    if size > 1e-9 {
                        self.pivot(i, j);
                        i += 1;
                    } else {
                        self.t.remove(i);
                        self.orig.remove(i);
                        self.basis.remove(i);
                        self.row_id.remove(i);
                        self.dirty += 1;
                    }
                } else {
                    i += 1;
                }
            }
            self.refactor();
        }
        let mut cost = vec![0.0; self.cols];
        cost[..n].copy_from_slice(objective);
        if !self.optimize(&cost, self.artificial_start) {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.t[i][self.cols].max(0.0);
            }
        }
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let duals = self.duals(&cost);
        Ok(LpOutcome::Optimal { x, value, duals })
    }
}

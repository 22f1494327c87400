//! Linear-programming kernel: a bounded-variable revised simplex that returns
//! primal values, row duals and reduced costs.
//!
//! Dual sign convention: `row_duals[i]` is the derivative of the optimal
//! objective with respect to `rhs[i]`, and `reduced_costs[j]` is
//! `c_j - a_j^T y`. For a minimization this makes duals of `<=` rows
//! nonpositive and duals of `>=` rows nonnegative.

pub mod kkt;
mod lu;
pub mod mps;
mod simplex;

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

pub use kkt::{check_kkt, KktReport};

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    Invalid(String),
    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("strong duality violated: primal {primal}, dual {dual}")]
    DualityGap { primal: f64, dual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse row, sorted by column with duplicates merged.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program `opt c^T x  s.t.  a_i^T x (<=|=|>=) b_i,  l <= x <= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Basis statuses of the structural columns followed by one logical per row.
/// Feeding it back into [`solve_lp_with`] warm-starts a related problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub basis: Basis,
    /// True when some basic variable sits on one of its bounds, in which
    /// case the optimal duals need not be unique.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Primal feasibility tolerance on the scaled problem.
    pub primal_tol: f64,
    /// Reduced-cost tolerance on the scaled problem.
    pub dual_tol: f64,
    /// Relative tolerance for the strong-duality certificate, which checks
    /// `|primal - dual| <= duality_tol * (gap_scale + |primal|)`.
    pub duality_tol: f64,
    pub gap_scale: f64,
    /// Count the solve in [`solve_stats`].
    pub track_stats: bool,
    pub refactor_every: usize,
    pub stall_window: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            duality_tol: 1e-6,
            gap_scale: 1.0,
            track_stats: true,
            refactor_every: 100,
            stall_window: 50,
            max_iterations: 2_000_000,
        }
    }
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { sense, objective: Vec::new(), lower: Vec::new(), upper: Vec::new(), constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_constraint<I>(&mut self, terms: I, relation: Relation, rhs: f64) -> usize
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut t: Vec<(usize, f64)> = terms.into_iter().collect();
        t.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (j, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.constraints.push(Constraint { terms: merged, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Invalid("bound vectors do not match the objective length".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::Invalid(format!("objective coefficient of column {j} is not finite")));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Invalid(format!("column {j} has bounds [{}, {}]", self.lower[j], self.upper[j])));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("column {j} has an empty infinite bound")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::Invalid(format!("row {i} has a non-finite right-hand side")));
            }
            for &(j, v) in &c.terms {
                if j >= n || !v.is_finite() {
                    return Err(LpError::Invalid(format!("row {i} references column {j} with value {v}")));
                }
            }
        }
        Ok(())
    }

    /// Objective value `c^T x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Left-hand side `a_i^T x` of every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.terms.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }
}

static SOLVES: AtomicU64 = AtomicU64::new(0);
static MAX_GAP_BITS: AtomicU64 = AtomicU64::new(0);

/// Process-wide counters over every optimal solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub optimal_solves: u64,
    /// Largest `|primal - dual| / (1 + |primal|)` seen.
    pub max_relative_gap: f64,
}

pub fn solve_stats() -> SolveStats {
    SolveStats {
        optimal_solves: SOLVES.load(Ordering::Relaxed),
        max_relative_gap: f64::from_bits(MAX_GAP_BITS.load(Ordering::Relaxed)),
    }
}

fn record_gap(gap: f64) {
    SOLVES.fetch_add(1, Ordering::Relaxed);
    // Nonnegative floats order like their bit patterns.
    MAX_GAP_BITS.fetch_max(gap.to_bits(), Ordering::Relaxed);
}

fn pow2_scale(max_abs: f64) -> f64 {
    if max_abs <= 0.0 || !max_abs.is_finite() {
        1.0
    } else {
        (2.0f64).powi(-(max_abs.log2().round() as i32))
    }
}

pub fn solve_lp(problem: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &SolverOptions::default(), None)
}

/// Solve with explicit options and an optional warm-start basis.
pub fn solve_lp_with(
    problem: &LinearProgram,
    opts: &SolverOptions,
    warm: Option<&Basis>,
) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let flip = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };

    // Row then column equilibration with powers of two.
    let row_scale: Vec<f64> =
        problem.constraints.iter().map(|c| pow2_scale(c.terms.iter().fold(0.0f64, |a, e| a.max(e.1.abs())))).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
    for (i, c) in problem.constraints.iter().enumerate() {
        for &(j, v) in &c.terms {
            cols[j].push((i, v * row_scale[i]));
        }
    }
    let col_scale: Vec<f64> =
        (0..n).map(|j| pow2_scale(cols[j].iter().fold(0.0f64, |a, e| a.max(e.1.abs())))).collect();
    for j in 0..n {
        for e in cols[j].iter_mut() {
            e.1 *= col_scale[j];
        }
    }
    let obj_scale = pow2_scale((0..n).fold(0.0f64, |a, j| a.max((problem.objective[j] * col_scale[j]).abs())));
    let mut cost = vec![0.0; n + m];
    let mut lo = vec![0.0; n + m];
    let mut up = vec![0.0; n + m];
    for j in 0..n {
        cost[j] = flip * problem.objective[j] * col_scale[j] * obj_scale;
        lo[j] = problem.lower[j] / col_scale[j];
        up[j] = problem.upper[j] / col_scale[j];
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        cols[n + i].push((i, -1.0));
        let b = c.rhs * row_scale[i];
        let (l, u) = match c.relation {
            Relation::Le => (f64::NEG_INFINITY, b),
            Relation::Ge => (b, f64::INFINITY),
            Relation::Eq => (b, b),
        };
        lo[n + i] = l;
        up[n + i] = u;
    }
    let scaled = simplex::Scaled { m, n, cols, cost, lo, up };

    let mut warm_basis = warm.cloned();
    let mut attempt = 0;
    loop {
        let out = simplex::solve(&scaled, opts, warm_basis.as_ref())?;
        let x: Vec<f64> = (0..n).map(|j| out.x[j] * col_scale[j]).collect();
        let row_duals: Vec<f64> = (0..m).map(|i| flip * out.y[i] * row_scale[i] / obj_scale).collect();
        let reduced_costs: Vec<f64> = (0..n).map(|j| flip * out.d[j] / (col_scale[j] * obj_scale)).collect();
        let objective = problem.evaluate(&x);
        let degenerate = out.status == LpStatus::Optimal
            && (0..n + m).any(|j| {
                out.basis.status[j] == VarStatus::Basic && {
                    let v = out.x[j];
                    let tol = 1e-9 * (1.0 + v.abs());
                    (v - scaled.lo[j]).abs() <= tol || (scaled.up[j] - v).abs() <= tol
                }
            });
        let mut sol = LpSolution {
            status: out.status,
            x,
            row_duals,
            reduced_costs,
            objective,
            dual_objective: f64::NAN,
            iterations: out.iterations,
            basis: out.basis,
            degenerate,
        };
        if sol.status != LpStatus::Optimal {
            return Ok(sol);
        }
        sol.dual_objective = dual_objective(problem, &sol);
        let gap = (sol.objective - sol.dual_objective).abs() / (opts.gap_scale + sol.objective.abs());
        if gap <= opts.duality_tol {
            if opts.track_stats {
                record_gap(gap);
            }
            return Ok(sol);
        }
        attempt += 1;
        if attempt > 2 {
            return Err(LpError::DualityGap { primal: sol.objective, dual: sol.dual_objective });
        }
        // Re-enter from the final basis; the fresh factorization removes drift.
        warm_basis = Some(sol.basis.clone());
    }
}

/// Dual objective `b^T y + sum_j d_j * (bound selected by the sign of d_j)`.
/// Infinite when the reduced costs point at an infinite bound.
pub fn dual_objective(problem: &LinearProgram, sol: &LpSolution) -> f64 {
    // Work in minimization form.
    let flip = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let cmax = problem.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut total = 0.0;
    for (i, c) in problem.constraints.iter().enumerate() {
        total += c.rhs * flip * sol.row_duals[i];
    }
    for j in 0..problem.num_vars() {
        let d = flip * sol.reduced_costs[j];
        if d.abs() <= 1e-11 * (1.0 + problem.objective[j].abs()) {
            continue;
        }
        let bound = if d > 0.0 { problem.lower[j] } else { problem.upper[j] };
        if !bound.is_finite() {
            // Round-off on a free direction is charged at the current value.
            if d.abs() <= 1e-9 * (1.0 + cmax) {
                total += d * sol.x[j];
                continue;
            }
            return flip * f64::NEG_INFINITY;
        }
        total += d * bound;
    }
    flip * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bound_constraint_is_active() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_constraint([(x, 1.0)], Relation::Ge, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.row_duals[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.dual_objective, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint([(x, 1.0)], Relation::Ge, 1.0);
        lp.add_constraint([(x, 1.0)], Relation::Le, 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_constraint([(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 10.0, 1.0);
        let r = lp.add_constraint([(x, 1.0), (x, 1.0), (x, -2.0)], Relation::Le, 1.0);
        assert!(lp.constraints[r].terms.is_empty());
    }

    #[test]
    fn rejects_crossed_bounds() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_var(1.0, 0.0, 0.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::Invalid(_))));
    }

    #[test]
    fn maximization_duals_follow_objective() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(0.0, 3.0, 3.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_constraint([(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        lp.add_constraint([(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 11.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-9);
        // Relaxing the first row by one unit buys one more y.
        assert_abs_diff_eq!(sol.row_duals[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.row_duals[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.reduced_costs[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.dual_objective, 11.0, epsilon = 1e-9);
    }
}

//! Optimality certificate for a solved LP.

use super::{LinearProgram, LpSolution, Relation, Sense};

/// Maximum residual of each KKT condition, each normalized by a natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `|d_j - (c_j - a_j^T y)|`
    pub stationarity: f64,
    /// Row and bound violations of `x`.
    pub primal: f64,
    /// Sign violations of `y` and of `d` relative to where `x_j` sits.
    pub dual: f64,
    /// Products of multipliers with the slack of the constraint they price.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn check_kkt(problem: &LinearProgram, sol: &LpSolution) -> KktReport {
    let flip = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let n = problem.num_vars();
    let x = &sol.x;
    let scale = 1.0 + sol.objective.abs();
    let mut stationarity = 0.0f64;
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;

    let mut aty = vec![0.0; n];
    for (i, c) in problem.constraints.iter().enumerate() {
        let y = flip * sol.row_duals[i];
        let mut act = 0.0;
        let mut mag = c.rhs.abs();
        for &(j, a) in &c.terms {
            act += a * x[j];
            mag = mag.max((a * x[j]).abs());
            aty[j] += a * y;
        }
        let norm = 1.0 + mag;
        let slack = c.rhs - act;
        let (viol, sign_viol) = match c.relation {
            Relation::Le => ((-slack).max(0.0), y.max(0.0)),
            Relation::Ge => (slack.max(0.0), (-y).max(0.0)),
            Relation::Eq => (slack.abs(), 0.0),
        };
        primal = primal.max(viol / norm);
        dual = dual.max(sign_viol / scale);
        comp = comp.max((y * slack).abs() / scale);
    }
    for j in 0..n {
        let c = flip * problem.objective[j];
        let d = flip * sol.reduced_costs[j];
        let (l, u) = (problem.lower[j], problem.upper[j]);
        let cnorm = 1.0 + c.abs();
        stationarity = stationarity.max((d - (c - aty[j])).abs() / cnorm);
        let xnorm = 1.0 + x[j].abs();
        primal = primal.max((l - x[j]).max(0.0) / xnorm).max((x[j] - u).max(0.0) / xnorm);
        let at_lower = l.is_finite() && x[j] - l <= 1e-9 * (1.0 + l.abs());
        let at_upper = u.is_finite() && u - x[j] <= 1e-9 * (1.0 + u.abs());
        let sign_viol = match (at_lower, at_upper) {
            (true, true) => 0.0,
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (false, false) => d.abs(),
        };
        dual = dual.max(sign_viol / cnorm);
        let gap = if d > 0.0 { x[j] - l } else { u - x[j] };
        if d != 0.0 && gap.is_finite() {
            comp = comp.max((d * gap).abs() / scale);
        }
    }
    KktReport { stationarity, primal, dual, complementarity: comp }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;

    #[test]
    fn optimal_solution_passes_and_perturbation_fails() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 4.0, -1.0);
        let y = lp.add_var(0.0, 4.0, -2.0);
        lp.add_constraint([(x, 1.0), (y, 1.0)], Relation::Le, 5.0);
        lp.add_constraint([(x, 1.0), (y, -1.0)], Relation::Ge, -2.0);
        let sol = solve_lp(&lp).unwrap();
        let report = check_kkt(&lp, &sol);
        assert!(report.within(1e-7), "{report:?}");

        let mut bad = sol.clone();
        bad.x[0] += 0.5;
        assert!(check_kkt(&lp, &bad).primal > 1e-7);
    }
}

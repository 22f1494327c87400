//! Bounded-variable primal revised simplex on the computational form
//! `A x - s = 0`, `l <= (x, s) <= u`.
//!
//! Every row gets a logical variable `s_i` whose bounds encode the relation
//! and right-hand side, so the initial basis is the identity-like logical
//! basis. Phase 1 minimizes the sum of bound violations of basic variables;
//! phase 2 runs on the true costs. Pricing is Dantzig's rule, switching to
//! Bland's rule after `stall_window` iterations without objective progress.

use super::lu::LuFactors;
use super::{Basis, LpError, LpStatus, SolverOptions, VarStatus};

const PIVOT_TOL: f64 = 1e-9;

pub(crate) struct Scaled {
    pub m: usize,
    pub n: usize,
    /// Columns of all `n + m` variables (logicals last).
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
}

pub(crate) struct Outcome {
    pub status: LpStatus,
    /// Values of all `n + m` variables.
    pub x: Vec<f64>,
    /// Row duals.
    pub y: Vec<f64>,
    /// Reduced costs of all `n + m` variables.
    pub d: Vec<f64>,
    pub iterations: usize,
    pub basis: Basis,
}

struct Simplex<'a> {
    p: &'a Scaled,
    opts: &'a SolverOptions,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    lu: LuFactors,
    scratch: Vec<f64>,
    iterations: usize,
    /// Working primal feasibility tolerance.
    ptol: f64,
}

enum Ratio {
    Flip,
    Leave { pos: usize, to_upper: bool },
    Unbounded,
}

pub(crate) fn solve(p: &Scaled, opts: &SolverOptions, warm: Option<&Basis>) -> Result<Outcome, LpError> {
    let total = p.n + p.m;
    let mut status = vec![VarStatus::AtLower; total];
    let mut head = Vec::with_capacity(p.m);
    let warm_ok = warm
        .is_some_and(|b| b.status.len() == total && b.status.iter().filter(|s| **s == VarStatus::Basic).count() == p.m);
    if let (true, Some(b)) = (warm_ok, warm) {
        for (j, s) in b.status.iter().enumerate() {
            status[j] = *s;
            if *s == VarStatus::Basic {
                head.push(j);
            }
        }
    } else {
        for (j, s) in status.iter_mut().enumerate() {
            *s = if j >= p.n { VarStatus::Basic } else { VarStatus::AtLower };
        }
        head.extend(p.n..total);
    }
    let mut x = vec![0.0; total];
    for j in 0..total {
        if status[j] != VarStatus::Basic {
            status[j] = place_nonbasic(status[j], p.lo[j], p.up[j]);
            x[j] = nonbasic_value(status[j], p.lo[j], p.up[j]);
        }
    }
    let mut s = Simplex {
        p,
        opts,
        x,
        status,
        head,
        lu: LuFactors::default(),
        scratch: vec![0.0; p.m],
        iterations: 0,
        ptol: opts.primal_tol,
    };
    s.refactor()?;
    s.run()
}

fn place_nonbasic(current: VarStatus, lo: f64, up: f64) -> VarStatus {
    match current {
        VarStatus::AtUpper if up.is_finite() => VarStatus::AtUpper,
        _ if lo.is_finite() => VarStatus::AtLower,
        _ if up.is_finite() => VarStatus::AtUpper,
        _ => VarStatus::Free,
    }
}

fn nonbasic_value(s: VarStatus, lo: f64, up: f64) -> f64 {
    match s {
        VarStatus::AtLower => lo,
        VarStatus::AtUpper => up,
        _ => 0.0,
    }
}

impl Simplex<'_> {
    fn refactor(&mut self) -> Result<(), LpError> {
        let mut attempts = 0;
        loop {
            let cols = &self.p.cols;
            let head = &self.head;
            match LuFactors::factorize(self.p.m, |pos| &cols[head[pos]][..]) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(sing) => {
                    attempts += 1;
                    if attempts > 5 {
                        return Err(LpError::NumericalBreakdown("basis stays singular after repair".into()));
                    }
                    for (pos, row) in sing.positions.iter().zip(sing.rows.iter()) {
                        let out = self.head[*pos];
                        let logical = self.p.n + row;
                        self.head[*pos] = logical;
                        self.status[logical] = VarStatus::Basic;
                        let (lo, up) = (self.p.lo[out], self.p.up[out]);
                        let v = self.x[out];
                        let st = if lo.is_finite() && (!up.is_finite() || (v - lo).abs() <= (up - v).abs()) {
                            VarStatus::AtLower
                        } else if up.is_finite() {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::Free
                        };
                        self.status[out] = st;
                        self.x[out] = nonbasic_value(st, lo, up);
                    }
                }
            }
        }
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.p.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.p.n + m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for &(i, a) in &self.p.cols[j] {
                    rhs[i] -= a * v;
                }
            }
        }
        self.lu.ftran(&mut rhs, &mut self.scratch);
        for pos in 0..m {
            self.x[self.head[pos]] = rhs[pos];
        }
    }

    /// Phase-1 cost of each basic position and the maximum violation.
    fn infeasibility(&self, costs: &mut [f64]) -> (f64, f64) {
        let tol = self.ptol;
        let mut sum = 0.0;
        let mut worst = 0.0f64;
        for (pos, c) in costs.iter_mut().enumerate() {
            let j = self.head[pos];
            let v = self.x[j];
            *c = 0.0;
            if v < self.p.lo[j] - tol {
                *c = -1.0;
                sum += self.p.lo[j] - v;
                worst = worst.max(self.p.lo[j] - v);
            } else if v > self.p.up[j] + tol {
                *c = 1.0;
                sum += v - self.p.up[j];
                worst = worst.max(v - self.p.up[j]);
            }
        }
        (sum, worst)
    }

    fn objective(&self) -> f64 {
        self.p.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn run(mut self) -> Result<Outcome, LpError> {
        let p = self.p;
        let m = p.m;
        let total = p.n + m;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut phase_costs = vec![0.0; m];
        let mut bland = false;
        let mut best_progress = f64::INFINITY;
        let mut stalled = 0usize;
        let mut last_phase1 = true;
        let mut polish_rounds = 0;

        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let (infeas_sum, infeas_max) = self.infeasibility(&mut phase_costs);
            let phase1 = infeas_max > 0.0;
            if phase1 != last_phase1 {
                best_progress = f64::INFINITY;
                stalled = 0;
                bland = false;
                last_phase1 = phase1;
            }
            let progress = if phase1 { infeas_sum } else { self.objective() };
            if progress < best_progress - 1e-12 * (1.0 + progress.abs()) {
                best_progress = progress;
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled >= self.opts.stall_window {
                    bland = true;
                }
            }

            for pos in 0..m {
                y[pos] = if phase1 { phase_costs[pos] } else { p.cost[self.head[pos]] };
            }
            self.lu.btran(&mut y, &mut self.scratch);

            // Pricing.
            let dtol = self.opts.dual_tol;
            let mut entering = usize::MAX;
            let mut entering_d = 0.0;
            let mut best_score = 0.0;
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || p.lo[j] == p.up[j] {
                    continue;
                }
                let mut d = if phase1 { 0.0 } else { p.cost[j] };
                for &(i, a) in &p.cols[j] {
                    d -= y[i] * a;
                }
                let eligible = match st {
                    VarStatus::AtLower => d < -dtol,
                    VarStatus::AtUpper => d > dtol,
                    VarStatus::Free => d.abs() > dtol,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    entering_d = d;
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = j;
                    entering_d = d;
                }
            }

            if entering == usize::MAX {
                // Refactor once before declaring a final answer to flush drift.
                if polish_rounds < 2 && self.lu.num_etas() > 0 {
                    polish_rounds += 1;
                    self.refactor()?;
                    continue;
                }
                if phase1 {
                    // A stalled phase 1 with a round-off sized residual is
                    // feasible; widen the working tolerance and go on.
                    if infeas_max <= 1e3 * self.opts.primal_tol && self.ptol < infeas_max {
                        self.ptol = 2.0 * infeas_max;
                        continue;
                    }
                    return Ok(self.finish(LpStatus::Infeasible));
                }
                return Ok(self.finish(LpStatus::Optimal));
            }

            let q = entering;
            alpha.iter_mut().for_each(|a| *a = 0.0);
            for &(i, a) in &p.cols[q] {
                alpha[i] = a;
            }
            self.lu.ftran(&mut alpha, &mut self.scratch);
            let dir = if entering_d < 0.0 { 1.0 } else { -1.0 };

            let (ratio, step) = self.ratio_test(q, dir, &alpha, phase1, bland);
            self.iterations += 1;
            match ratio {
                Ratio::Unbounded => {
                    if phase1 {
                        // Cannot happen in exact arithmetic; refresh and retry.
                        if polish_rounds > 4 {
                            return Err(LpError::NumericalBreakdown("unbounded phase-1 ray".into()));
                        }
                        polish_rounds += 1;
                        self.refactor()?;
                        continue;
                    }
                    return Ok(self.finish(LpStatus::Unbounded));
                }
                Ratio::Flip => {
                    let to_upper = self.status[q] != VarStatus::AtUpper;
                    let delta = p.up[q] - p.lo[q];
                    for pos in 0..m {
                        let a = alpha[pos];
                        if a != 0.0 {
                            self.x[self.head[pos]] -= dir * delta * a;
                        }
                    }
                    if to_upper {
                        self.status[q] = VarStatus::AtUpper;
                        self.x[q] = p.up[q];
                    } else {
                        self.status[q] = VarStatus::AtLower;
                        self.x[q] = p.lo[q];
                    }
                }
                Ratio::Leave { pos, to_upper } => {
                    if alpha[pos].abs() < 1e-12 {
                        return Err(LpError::NumericalBreakdown("pivot element vanished".into()));
                    }
                    for i in 0..m {
                        let a = alpha[i];
                        if a != 0.0 {
                            self.x[self.head[i]] -= dir * step * a;
                        }
                    }
                    self.x[q] += dir * step;
                    let out = self.head[pos];
                    if to_upper {
                        self.status[out] = VarStatus::AtUpper;
                        self.x[out] = p.up[out];
                    } else {
                        self.status[out] = VarStatus::AtLower;
                        self.x[out] = p.lo[out];
                    }
                    self.status[q] = VarStatus::Basic;
                    self.head[pos] = q;
                    self.lu.push_eta(pos, &alpha);
                    if self.lu.num_etas() >= self.opts.refactor_every {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool, bland: bool) -> (Ratio, f64) {
        let p = self.p;
        let tol = self.ptol;
        // Candidate breakpoints: (pos, distance, rate, bound is upper).
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (pos, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.head[pos];
            let rate = -dir * a;
            let (v, lo, up) = (self.x[j], p.lo[j], p.up[j]);
            let cand = if phase1 && v < lo - tol {
                (rate > 0.0).then(|| (lo - v, false))
            } else if phase1 && v > up + tol {
                (rate < 0.0).then(|| (v - up, true))
            } else if rate > 0.0 {
                up.is_finite().then(|| ((up - v).max(0.0), true))
            } else {
                lo.is_finite().then(|| ((v - lo).max(0.0), false))
            };
            if let Some((dist, upper)) = cand {
                cands.push((pos, dist, rate.abs(), upper));
            }
        }
        let range = p.up[q] - p.lo[q];
        if cands.is_empty() {
            return if range.is_finite() { (Ratio::Flip, range) } else { (Ratio::Unbounded, f64::INFINITY) };
        }
        let chosen = if bland {
            let tmin = cands.iter().map(|c| c.1 / c.2).fold(f64::INFINITY, f64::min);
            cands.iter().filter(|c| c.1 / c.2 <= tmin + 1e-12).min_by_key(|c| self.head[c.0]).copied()
        } else {
            let tmax = cands.iter().map(|c| (c.1 + tol) / c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 / c.2 <= tmax)
                .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.0.cmp(&a.0)))
                .copied()
        };
        let (pos, dist, rate, upper) = chosen.expect("nonempty candidate list");
        let step = dist / rate;
        if range.is_finite() && range <= step {
            return (Ratio::Flip, range);
        }
        (Ratio::Leave { pos, to_upper: upper }, step)
    }

    fn finish(self, status: LpStatus) -> Outcome {
        let p = self.p;
        let m = p.m;
        let mut y = vec![0.0; m];
        for pos in 0..m {
            y[pos] = p.cost[self.head[pos]];
        }
        let mut scratch = vec![0.0; m];
        self.lu.btran(&mut y, &mut scratch);
        let d = (0..p.n + m)
            .map(|j| {
                if self.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    p.cost[j] - p.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
                }
            })
            .collect();
        Outcome { status, x: self.x, y, d, iterations: self.iterations, basis: Basis { status: self.status } }
    }
}

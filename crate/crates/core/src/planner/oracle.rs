use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{CandidateSpace, InvestmentPlan};
use super::{BigMReport, CellProfit, PlannerResult};
use crate::clearing::{build_clearing_lp, investment_cost, ClearingLp, ClearingProblem};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::scenario::ScenarioSet;
use crate::system::SystemModel;

const INF: f64 = f64::INFINITY;

/// A fixed plan scored over the whole scenario grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEvaluation {
    pub plan: InvestmentPlan,
    /// Discounted expected profit net of investment, $; `-inf` when infeasible.
    pub objective: f64,
    /// False when some cell admits no optimal LMPs inside the price bounds.
    pub feasible: bool,
    pub cells: Vec<CellProfit>,
    pub max_duality_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CellEval {
    pub profit: f64,
    pub residual: f64,
}

/// GENCO profit of one cell under the most favourable optimal LMPs with
/// `|lambda| <= lmp_factor * voll`. `None` when no optimal dual fits.
pub(crate) fn cell_profit(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    plan: &InvestmentPlan,
    s: usize,
    b: usize,
    y: usize,
    lmp_factor: f64,
) -> Result<Option<CellEval>> {
    let c = build_clearing_lp(&ClearingProblem { model, scenarios, s, b, y, plan });
    let lay = &c.layout;
    let counted_units: Vec<(usize, usize, usize)> = lay
        .unit_col
        .iter()
        .enumerate()
        .filter(|(g, _)| model.units[*g].is_candidate() || model.units[*g].owned)
        .filter_map(|(g, col)| col.map(|(col, n)| (g, col, n)))
        .collect();
    let counted_farms: Vec<(usize, usize)> = lay
        .farm_col
        .iter()
        .enumerate()
        .filter(|(w, _)| model.wind_farms[*w].is_candidate() || model.wind_farms[*w].owned)
        .filter_map(|(_, col)| *col)
        .collect();
    if counted_units.is_empty() && counted_farms.is_empty() {
        return Ok(Some(CellEval { profit: 0.0, residual: 0.0 }));
    }
    let sol = solve_lp(&c.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("clearing LP for s={s} b={b} y={y} ended {:?}", sol.status)));
    }
    let residual = (sol.objective - sol.dual_objective).abs() / (1.0 + sol.objective.abs());
    let m = lmp_factor * model.config.voll;
    let tol = 1e-9 * (1.0 + m);
    let profit_with = |lmp: &dyn Fn(usize) -> f64| -> f64 {
        let units: f64 = counted_units
            .iter()
            .map(|&(g, col, n)| super::margin(lmp(n), model.units[g].marginal_cost) * sol.x[col])
            .sum();
        let farms: f64 = counted_farms.iter().map(|&(col, n)| super::margin(lmp(n), 0.0) * sol.x[col]).sum();
        units + farms
    };

    if !sol.degenerate {
        let lmp: Vec<f64> = lay.balance_row.iter().map(|&r| sol.row_duals[r]).collect();
        let mut inside = lmp.iter().all(|l| l.abs() <= m + tol);
        for (g, col) in lay.unit_col.iter().enumerate() {
            if let Some((col, _)) = col {
                inside &= sol.reduced_costs[*col].min(0.0) >= -(model.units[g].marginal_cost.abs() + m) - tol;
            }
        }
        for (col, _) in lay.farm_col.iter().flatten() {
            inside &= sol.reduced_costs[*col].min(0.0) >= -m - tol;
        }
        if !inside {
            return Ok(None);
        }
        return Ok(Some(CellEval { profit: profit_with(&|n| lmp[n]), residual }));
    }

    let (d, lam) = dual_face_lp(model, &c, m, &counted_units, &counted_farms, &sol.x);
    let face = solve_lp(&d)?;
    match face.status {
        LpStatus::Optimal => Ok(Some(CellEval { profit: profit_with(&|n| face.x[lam[n]]), residual })),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Solver(format!("dual face LP unbounded for s={s} b={b} y={y}"))),
    }
}

/// Dual of the clearing LP restricted to its optimal face, maximizing the
/// revenue `sum P* lambda` of the counted injections. The face is cut out by
/// complementary slackness with the primal optimum `x*`: a bound or row dual
/// is forced to zero wherever `x*` is strictly inside it.
fn dual_face_lp(
    model: &SystemModel,
    c: &ClearingLp,
    m: f64,
    counted_units: &[(usize, usize, usize)],
    counted_farms: &[(usize, usize)],
    x_star: &[f64],
) -> (LinearProgram, Vec<usize>) {
    let lay = &c.layout;
    let nb = model.buses.len();
    let inside = |gap: f64, bound: f64| gap > 1e-9 * (1.0 + bound.abs());
    let mut d = LinearProgram::new(Sense::Maximize);
    let lam: Vec<usize> = (0..nb).map(|_| d.add_var(-m, m, 0.0)).collect();
    // Upper-bound dual in [lo, 0] and lower-bound dual in [0, inf) of a
    // column with bounds [0, up], plus its stationarity row.
    let bound_duals = |d: &mut LinearProgram, n: usize, col: usize, lo: f64, cost: f64| {
        let (x, up) = (x_star[col], c.lp.upper[col]);
        let fmax = d.add_var(if inside(up - x, up) { 0.0 } else { lo }, 0.0, 0.0);
        let fmin = d.add_var(0.0, if inside(x, up) { 0.0 } else { INF }, 0.0);
        d.add_constraint([(lam[n], 1.0), (fmax, 1.0), (fmin, 1.0)], Relation::Eq, cost);
    };
    for (g, col) in lay.unit_col.iter().enumerate() {
        if let Some((col, n)) = *col {
            let cost = model.units[g].marginal_cost;
            bound_duals(&mut d, n, col, -(cost.abs() + m), cost);
        }
    }
    for &(col, n) in lay.farm_col.iter().flatten() {
        bound_duals(&mut d, n, col, -m, 0.0);
    }
    for (n, col) in lay.shed_col.iter().enumerate() {
        if let Some(col) = *col {
            bound_duals(&mut d, n, col, -INF, model.config.voll);
        }
    }
    let mut angle_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for (l, line) in model.lines.iter().enumerate() {
        if lay.flow_rows[l].is_none() {
            continue;
        }
        let (a, b, bs) = (line.from, line.to, line.susceptance);
        let flow = bs * (x_star[lay.angle_col[a]] - x_star[lay.angle_col[b]]);
        let f_lo = if inside(line.capacity - flow, line.capacity) { 0.0 } else { -INF };
        let b_lo = if inside(line.capacity + flow, line.capacity) { 0.0 } else { -INF };
        let tf = d.add_var(f_lo, 0.0, 0.0);
        let tb = d.add_var(b_lo, 0.0, 0.0);
        angle_rows[a].extend([(lam[a], -bs), (lam[b], bs), (tf, bs), (tb, -bs)]);
        angle_rows[b].extend([(lam[a], bs), (lam[b], -bs), (tf, -bs), (tb, bs)]);
    }
    for &(n, _) in &lay.pin_rows {
        let xi = d.add_var(-INF, INF, 0.0);
        angle_rows[n].push((xi, 1.0));
    }
    for terms in angle_rows {
        d.add_constraint(terms, Relation::Eq, 0.0);
    }
    for &(_, col, n) in counted_units {
        d.objective[lam[n]] += x_star[col];
    }
    for &(col, n) in counted_farms {
        d.objective[lam[n]] += x_star[col];
    }
    (d, lam)
}

/// Score a fixed plan: every cell cleared, profits weighted by discount,
/// probability and duration, investment cost subtracted.
pub fn evaluate_plan(model: &SystemModel, scenarios: &ScenarioSet, plan: &InvestmentPlan) -> Result<PlanEvaluation> {
    scenarios.check(model)?;
    if plan.units.len() != model.units.len() || plan.farms.len() != model.wind_farms.len() {
        return Err(Error::validation("plan does not match the system"));
    }
    let cfg = &model.config;
    let (ns, nbk) = (scenarios.len(), model.load_blocks.len());
    let cells: Vec<(usize, usize, usize)> =
        (1..=cfg.years).flat_map(|y| (0..ns).flat_map(move |s| (0..nbk).map(move |b| (s, b, y)))).collect();
    let evals: Vec<Result<Option<CellEval>>> =
        cells.par_iter().map(|&(s, b, y)| cell_profit(model, scenarios, plan, s, b, y, cfg.lmp_bound_factor)).collect();
    let mut out = Vec::with_capacity(cells.len());
    let mut feasible = true;
    let mut max_res = 0.0f64;
    let mut objective = 0.0;
    for (&(s, b, y), e) in cells.iter().zip(evals) {
        let weight = cfg.discount_factor(y) * scenarios.scenarios[s].probability * model.load_blocks[b].duration;
        match e? {
            Some(e) => {
                max_res = max_res.max(e.residual);
                objective += weight * e.profit;
                out.push(CellProfit { s, b, y, profit: e.profit, weight });
            }
            None => {
                feasible = false;
                out.push(CellProfit { s, b, y, profit: f64::NAN, weight });
            }
        }
    }
    for y in 1..=cfg.years {
        objective -= cfg.discount_factor(y) * investment_cost(model, plan, y);
    }
    if !feasible {
        objective = f64::NEG_INFINITY;
    }
    Ok(PlanEvaluation { plan: plan.clone(), objective, feasible, cells: out, max_duality_residual: max_res })
}

/// Groups of interchangeable candidate assets, as sorted asset indices.
///
/// Two assets are interchangeable when they share every parameter and bus
/// set and the scenario set is unchanged, probabilities included, by
/// swapping their availability.
pub fn symmetry_classes(model: &SystemModel, scenarios: &ScenarioSet, space: &CandidateSpace) -> Vec<Vec<usize>> {
    let na = space.num_assets();
    let nu = space.units.len();
    let key = |sc: &crate::scenario::Scenario| -> (Vec<bool>, Vec<bool>, Vec<u64>) {
        (sc.unit_up.clone(), sc.line_up.clone(), sc.wind_speed.iter().map(|v| v.to_bits()).collect())
    };
    let index: HashMap<_, f64> = scenarios.scenarios.iter().map(|sc| (key(sc), sc.probability)).collect();
    let swap_invariant = |g1: usize, g2: usize| {
        scenarios.scenarios.iter().all(|sc| {
            if sc.unit_up[g1] == sc.unit_up[g2] {
                return true;
            }
            let mut k = key(sc);
            k.0.swap(g1, g2);
            index.get(&k).is_some_and(|&q| (q - sc.probability).abs() <= 1e-9 * q.max(sc.probability))
        })
    };
    let same = |a1: usize, a2: usize| -> bool {
        if (a1 < nu) != (a2 < nu) || space.buses_of(a1) != space.buses_of(a2) {
            return false;
        }
        if a1 < nu {
            let (g1, g2) = (space.units[a1], space.units[a2]);
            let (u1, u2) = (&model.units[g1], &model.units[g2]);
            u1.capacity == u2.capacity
                && u1.marginal_cost == u2.marginal_cost
                && u1.invest_cost == u2.invest_cost
                && u1.for_rate == u2.for_rate
                && swap_invariant(g1, g2)
        } else {
            let (f1, f2) = (&model.wind_farms[space.farms[a1 - nu]], &model.wind_farms[space.farms[a2 - nu]]);
            f1.n_turbines == f2.n_turbines && f1.power_curve == f2.power_curve && f1.invest_cost == f2.invest_cost
        }
    };
    let mut label: Vec<usize> = (0..na).collect();
    for a2 in 0..na {
        for a1 in 0..a2 {
            if label[a1] == a1 && same(a1, a2) {
                label[a2] = a1;
                break;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for a in 0..na {
        if label[a] == a {
            classes.push(vec![a]);
        } else {
            classes.iter_mut().find(|c| c[0] == label[a]).expect("class head precedes members").push(a);
        }
    }
    classes
}

/// Option vectors with nondecreasing options inside each symmetry class,
/// in lexicographic order. Each is the smallest member of its orbit.
fn representative_vectors(space: &CandidateSpace, classes: &[Vec<usize>], cap: usize) -> Result<Vec<Vec<usize>>> {
    let na = space.num_assets();
    let mut prev = vec![None; na];
    for c in classes {
        for w in c.windows(2) {
            prev[w[1]] = Some(w[0]);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; na];
    fn rec(
        a: usize,
        cur: &mut Vec<usize>,
        prev: &[Option<usize>],
        space: &CandidateSpace,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<()> {
        if a == cur.len() {
            if out.len() == cap {
                return Err(Error::Cap { what: "candidate investment vectors".into(), size: cap + 1, cap });
            }
            out.push(cur.clone());
            return Ok(());
        }
        let start = prev[a].map_or(0, |p| cur[p]);
        for o in start..space.options(a) {
            cur[a] = o;
            rec(a + 1, cur, prev, space, out, cap)?;
        }
        Ok(())
    }
    rec(0, &mut cur, &prev, space, &mut out, cap)?;
    Ok(out)
}

/// Exhaustive planner: scores every plan up to symmetry and returns the
/// best, breaking ties within `1e-6` relative toward the lexicographically
/// smallest option vector.
pub fn enumerate_oracle(model: &SystemModel, scenarios: &ScenarioSet, space: &CandidateSpace) -> Result<PlannerResult> {
    model.validate()?;
    let classes = symmetry_classes(model, scenarios, space);
    let vectors = representative_vectors(space, &classes, model.config.oracle_cap)?;
    let scores: Vec<Result<(f64, f64)>> = vectors
        .par_iter()
        .map(|v| {
            let e = evaluate_plan(model, scenarios, &space.plan_from_options(model, v))?;
            Ok((e.objective, e.max_duality_residual))
        })
        .collect();
    let mut objs = Vec::with_capacity(vectors.len());
    let mut max_res = 0.0f64;
    for s in scores {
        let (o, r) = s?;
        objs.push(o);
        max_res = max_res.max(r);
    }
    let best = objs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::Solver("no candidate plan admits bounded prices".into()));
    }
    let tol = 1e-6 * (1.0 + best.abs());
    let pick = objs.iter().position(|&o| o >= best - tol).expect("best is attained");
    let plan = space.plan_from_options(model, &vectors[pick]);
    let eval = evaluate_plan(model, scenarios, &plan)?;
    Ok(PlannerResult {
        method: "oracle".into(),
        plan,
        objective: eval.objective,
        bound: best,
        gap: 0.0,
        nodes: vectors.len(),
        profit_trace: eval.cells,
        big_m: BigMReport { ok: true, ..Default::default() },
        max_duality_residual: max_res,
        max_linearization_residual: 0.0,
        timed_out: false,
    })
}

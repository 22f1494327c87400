//! Hourly DC-OPF market clearing for one (scenario, block, year) under a
//! fixed investment plan, and the GENCO profit it implies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::planner::InvestmentPlan;
use crate::scenario::ScenarioSet;
use crate::system::{components, SystemModel};

/// Parameters of one (scenario, block, year) cell that do not depend on the
/// plan.
#[derive(Debug, Clone)]
pub struct BlockData {
    pub s: usize,
    pub b: usize,
    pub y: usize,
    /// MW per bus.
    pub load: Vec<f64>,
    /// Available capacity `k * Pmax` per unit, MW; candidates included.
    pub unit_cap: Vec<f64>,
    pub line_up: Vec<bool>,
    /// Available wind power per farm and bus position, MW.
    pub wind: Vec<Vec<f64>>,
    /// One angle reference per island: the slack bus for its own island,
    /// otherwise the lowest bus position.
    pub pins: Vec<usize>,
}

impl BlockData {
    pub fn new(model: &SystemModel, scenarios: &ScenarioSet, s: usize, b: usize, y: usize) -> Self {
        let sc = &scenarios.scenarios[s];
        let nb = model.buses.len();
        let load = (0..nb).map(|n| model.block_load(n, b, y)).collect();
        let unit_cap = model.units.iter().zip(&sc.unit_up).map(|(u, &up)| if up { u.capacity } else { 0.0 }).collect();
        let wind = (0..model.wind_farms.len())
            .map(|w| (0..nb).map(|n| scenarios.wind_available(model, s, w, n)).collect())
            .collect();
        let comp =
            components(nb, model.lines.iter().zip(&sc.line_up).filter(|(_, &up)| up).map(|(l, _)| (l.from, l.to)));
        let slack = model.slack_index();
        let mut pins: Vec<usize> = (0..nb).filter(|&n| comp[n] == n).collect();
        for p in pins.iter_mut() {
            if comp[slack] == *p {
                *p = slack;
            }
        }
        pins.sort_unstable();
        BlockData { s, b, y, load, unit_cap, line_up: sc.line_up.clone(), wind, pins }
    }
}

/// A lower-level instance: one grid cell under a fixed plan.
#[derive(Debug, Clone, Copy)]
pub struct ClearingProblem<'a> {
    pub model: &'a SystemModel,
    pub scenarios: &'a ScenarioSet,
    pub s: usize,
    pub b: usize,
    pub y: usize,
    pub plan: &'a InvestmentPlan,
}

/// Column and row positions of a clearing LP.
#[derive(Debug, Clone)]
pub struct ClearingLayout {
    /// Dispatch column and bus of every unit present in the LP.
    pub unit_col: Vec<Option<(usize, usize)>>,
    pub farm_col: Vec<Option<(usize, usize)>>,
    pub shed_col: Vec<Option<usize>>,
    pub angle_col: Vec<usize>,
    pub balance_row: Vec<usize>,
    /// `(forward, backward)` flow-limit rows of in-service lines.
    pub flow_rows: Vec<Option<(usize, usize)>>,
    /// `(bus, row)` of each angle reference.
    pub pin_rows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ClearingLp {
    pub lp: LinearProgram,
    pub layout: ClearingLayout,
    pub data: BlockData,
}

/// Build the cost-minimizing clearing LP. Generation, wind and shedding
/// limits are column bounds; devices with zero available capacity are left
/// out and dispatch nothing.
pub fn build_clearing_lp(p: &ClearingProblem) -> ClearingLp {
    let data = BlockData::new(p.model, p.scenarios, p.s, p.b, p.y);
    build_from_data(p.model, p.plan, data)
}

pub fn build_from_data(model: &SystemModel, plan: &InvestmentPlan, data: BlockData) -> ClearingLp {
    let nb = model.buses.len();
    let y = data.y;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];

    let mut unit_col = vec![None; model.units.len()];
    for (g, u) in model.units.iter().enumerate() {
        let bus = if u.is_candidate() { plan.unit_bus(g, y) } else { u.bus };
        if let Some(n) = bus {
            if data.unit_cap[g] > 0.0 {
                let c = lp.add_var(0.0, data.unit_cap[g], u.marginal_cost);
                at_bus[n].push(c);
                unit_col[g] = Some((c, n));
            }
        }
    }
    let mut farm_col = vec![None; model.wind_farms.len()];
    for (w, f) in model.wind_farms.iter().enumerate() {
        let bus = if f.is_candidate() { plan.farm_bus(w, y) } else { f.bus };
        if let Some(n) = bus {
            if data.wind[w][n] > 0.0 {
                let c = lp.add_var(0.0, data.wind[w][n], 0.0);
                at_bus[n].push(c);
                farm_col[w] = Some((c, n));
            }
        }
    }
    let shed_col: Vec<Option<usize>> =
        (0..nb).map(|n| (data.load[n] > 0.0).then(|| lp.add_var(0.0, data.load[n], model.config.voll))).collect();
    let angle_col: Vec<usize> = (0..nb).map(|_| lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();

    let mut balance_terms: Vec<Vec<(usize, f64)>> =
        (0..nb).map(|n| at_bus[n].iter().map(|&c| (c, 1.0)).chain(shed_col[n].map(|c| (c, 1.0))).collect()).collect();
    for (l, line) in model.lines.iter().enumerate() {
        if !data.line_up[l] {
            continue;
        }
        let bsus = line.susceptance;
        let (a, b) = (line.from, line.to);
        // Flow a->b leaves a and enters b.
        balance_terms[a].push((angle_col[a], -bsus));
        balance_terms[a].push((angle_col[b], bsus));
        balance_terms[b].push((angle_col[a], bsus));
        balance_terms[b].push((angle_col[b], -bsus));
    }
    let balance_row: Vec<usize> =
        balance_terms.into_iter().enumerate().map(|(n, t)| lp.add_constraint(t, Relation::Eq, data.load[n])).collect();
    let flow_rows = model
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            data.line_up[l].then(|| {
                let (a, b, bsus) = (angle_col[line.from], angle_col[line.to], line.susceptance);
                let fwd = lp.add_constraint([(a, bsus), (b, -bsus)], Relation::Le, line.capacity);
                let bwd = lp.add_constraint([(a, -bsus), (b, bsus)], Relation::Le, line.capacity);
                (fwd, bwd)
            })
        })
        .collect();
    let pin_rows =
        data.pins.iter().map(|&n| (n, lp.add_constraint([(angle_col[n], 1.0)], Relation::Eq, 0.0))).collect();

    ClearingLp {
        lp,
        layout: ClearingLayout { unit_col, farm_col, shed_col, angle_col, balance_row, flow_rows, pin_rows },
        data,
    }
}

/// Solved lower level with every primal and dual quantity by name.
///
/// Duals follow one convention: each is the derivative of the system cost
/// with respect to the right-hand side of its constraint. Upper-limit duals
/// are nonpositive, lower-limit duals nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClearingResult {
    pub s: usize,
    pub b: usize,
    pub y: usize,
    /// MW per unit; zero for units absent from the LP.
    pub dispatch: Vec<f64>,
    /// Bus where each unit was dispatched, if present.
    pub unit_bus: Vec<Option<usize>>,
    pub wind: Vec<f64>,
    pub farm_bus: Vec<Option<usize>>,
    pub shed: Vec<f64>,
    pub angle: Vec<f64>,
    /// MW from `from` to `to`; zero for lines out of service.
    pub flow: Vec<f64>,
    pub lmp: Vec<f64>,
    /// $/h.
    pub system_cost: f64,
    pub dual_objective: f64,
    pub phi_max: Vec<f64>,
    pub phi_min: Vec<f64>,
    pub beta_max: Vec<f64>,
    pub beta_min: Vec<f64>,
    pub gamma_max: Vec<f64>,
    pub gamma_min: Vec<f64>,
    pub theta_fwd: Vec<f64>,
    pub theta_bwd: Vec<f64>,
    /// `(bus, dual)` per angle reference.
    pub xi: Vec<(usize, f64)>,
    /// True when the LMPs need not be unique.
    pub degenerate: bool,
}

fn split(d: f64) -> (f64, f64) {
    (d.min(0.0), d.max(0.0))
}

/// Solve the clearing LP and map the solution back to named quantities.
pub fn clear_market(p: &ClearingProblem) -> Result<ClearingResult> {
    let c = build_clearing_lp(p);
    solve_clearing(p.model, &c)
}

pub fn solve_clearing(model: &SystemModel, c: &ClearingLp) -> Result<ClearingResult> {
    let sol = solve_lp(&c.lp)?;
    if sol.status != LpStatus::Optimal {
        // Shedding covers all demand, so this means malformed data.
        return Err(Error::Solver(format!(
            "clearing LP for scenario {} block {} year {} ended {:?}",
            c.data.s, c.data.b, c.data.y, sol.status
        )));
    }
    let lay = &c.layout;
    let nu = model.units.len();
    let nw = model.wind_farms.len();
    let nb = model.buses.len();
    let (mut dispatch, mut phi_max, mut phi_min) = (vec![0.0; nu], vec![0.0; nu], vec![0.0; nu]);
    let mut unit_bus = vec![None; nu];
    for g in 0..nu {
        if let Some((col, n)) = lay.unit_col[g] {
            dispatch[g] = sol.x[col];
            (phi_max[g], phi_min[g]) = split(sol.reduced_costs[col]);
            unit_bus[g] = Some(n);
        }
    }
    let (mut wind, mut gamma_max, mut gamma_min) = (vec![0.0; nw], vec![0.0; nw], vec![0.0; nw]);
    let mut farm_bus = vec![None; nw];
    for w in 0..nw {
        if let Some((col, n)) = lay.farm_col[w] {
            wind[w] = sol.x[col];
            (gamma_max[w], gamma_min[w]) = split(sol.reduced_costs[col]);
            farm_bus[w] = Some(n);
        }
    }
    let (mut shed, mut beta_max, mut beta_min) = (vec![0.0; nb], vec![0.0; nb], vec![0.0; nb]);
    for n in 0..nb {
        if let Some(col) = lay.shed_col[n] {
            shed[n] = sol.x[col];
            (beta_max[n], beta_min[n]) = split(sol.reduced_costs[col]);
        }
    }
    let angle: Vec<f64> = lay.angle_col.iter().map(|&c| sol.x[c]).collect();
    let lmp: Vec<f64> = lay.balance_row.iter().map(|&r| sol.row_duals[r]).collect();
    let nl = model.lines.len();
    let (mut flow, mut theta_fwd, mut theta_bwd) = (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
    for (l, line) in model.lines.iter().enumerate() {
        if let Some((f, b)) = lay.flow_rows[l] {
            flow[l] = line.susceptance * (angle[line.from] - angle[line.to]);
            theta_fwd[l] = sol.row_duals[f];
            theta_bwd[l] = sol.row_duals[b];
        }
    }
    let xi = lay.pin_rows.iter().map(|&(n, r)| (n, sol.row_duals[r])).collect();
    Ok(ClearingResult {
        s: c.data.s,
        b: c.data.b,
        y: c.data.y,
        dispatch,
        unit_bus,
        wind,
        farm_bus,
        shed,
        angle,
        flow,
        lmp,
        system_cost: sol.objective,
        dual_objective: sol.dual_objective,
        phi_max,
        phi_min,
        beta_max,
        beta_min,
        gamma_max,
        gamma_min,
        theta_fwd,
        theta_bwd,
        xi,
        degenerate: sol.degenerate,
    })
}

/// GENCO pool profit in $/h: owned existing units and farms plus every
/// candidate the plan has built, each paid the LMP of its own bus.
pub fn scenario_profit(result: &ClearingResult, model: &SystemModel, plan: &InvestmentPlan) -> f64 {
    let y = result.y;
    let mut total = 0.0;
    for (g, u) in model.units.iter().enumerate() {
        let counts = if u.is_candidate() { plan.unit_bus(g, y).is_some() } else { u.owned };
        if counts {
            if let Some(n) = result.unit_bus[g] {
                total += (result.lmp[n] - u.marginal_cost) * result.dispatch[g];
            }
        }
    }
    for (w, f) in model.wind_farms.iter().enumerate() {
        let counts = if f.is_candidate() { plan.farm_bus(w, y).is_some() } else { f.owned };
        if counts {
            if let Some(n) = result.farm_bus[w] {
                total += result.lmp[n] * result.wind[w];
            }
        }
    }
    total
}

/// Annualized investment cost, $/yr, of everything the plan has built by year `y`.
pub fn investment_cost(model: &SystemModel, plan: &InvestmentPlan, y: usize) -> f64 {
    let units: f64 =
        (0..model.units.len()).filter(|&g| plan.unit_bus(g, y).is_some()).map(|g| model.units[g].invest_cost).sum();
    let farms: f64 = (0..model.wind_farms.len())
        .filter(|&w| plan.farm_bus(w, y).is_some())
        .map(|w| model.wind_farms[w].invest_cost)
        .sum();
    units + farms
}

/// Results for every (scenario, block, year) cell.
#[derive(Debug, Clone)]
pub struct ClearingGrid {
    pub n_scenarios: usize,
    pub n_blocks: usize,
    pub years: usize,
    pub cells: Vec<Option<ClearingResult>>,
}

impl ClearingGrid {
    pub fn new(n_scenarios: usize, n_blocks: usize, years: usize) -> Self {
        ClearingGrid { n_scenarios, n_blocks, years, cells: vec![None; n_scenarios * n_blocks * years] }
    }

    fn index(&self, s: usize, b: usize, y: usize) -> usize {
        ((y - 1) * self.n_scenarios + s) * self.n_blocks + b
    }

    pub fn get(&self, s: usize, b: usize, y: usize) -> Option<&ClearingResult> {
        self.cells[self.index(s, b, y)].as_ref()
    }

    pub fn insert(&mut self, r: ClearingResult) {
        let i = self.index(r.s, r.b, r.y);
        self.cells[i] = Some(r);
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClearingResult> {
        self.cells.iter().flatten()
    }
}

/// Clear every cell under a fixed plan, in parallel.
pub fn clear_grid(model: &SystemModel, scenarios: &ScenarioSet, plan: &InvestmentPlan) -> Result<ClearingGrid> {
    let (ns, nbk, ny) = (scenarios.len(), model.load_blocks.len(), model.config.years);
    let cells: Vec<(usize, usize, usize)> =
        (1..=ny).flat_map(|y| (0..ns).flat_map(move |s| (0..nbk).map(move |b| (s, b, y)))).collect();
    let results: Vec<Result<ClearingResult>> =
        cells.par_iter().map(|&(s, b, y)| clear_market(&ClearingProblem { model, scenarios, s, b, y, plan })).collect();
    let mut grid = ClearingGrid::new(ns, nbk, ny);
    for r in results {
        grid.insert(r?);
    }
    Ok(grid)
}

/// Discounted expected profit over the horizon:
/// `sum_y (1+r)^-y * (sum_{s,b} pi_s T_b Pi_sby - investment cost in y)`.
pub fn expected_discounted_profit(
    grid: &ClearingGrid,
    plan: &InvestmentPlan,
    model: &SystemModel,
    scenarios: &ScenarioSet,
) -> Result<f64> {
    let mut total = 0.0;
    for y in 1..=model.config.years {
        let mut yearly = 0.0;
        for (s, sc) in scenarios.scenarios.iter().enumerate() {
            for (b, blk) in model.load_blocks.iter().enumerate() {
                let r = grid
                    .get(s, b, y)
                    .ok_or_else(|| Error::validation(format!("missing clearing result for s={s} b={b} y={y}")))?;
                yearly += sc.probability * blk.duration * scenario_profit(r, model, plan);
            }
        }
        total += model.config.discount_factor(y) * (yearly - investment_cost(model, plan, y));
    }
    Ok(total)
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::bnb::{branch_and_bound, BnbOptions};
use super::oracle::{cell_profit, evaluate_plan};
use super::plan::{CandidateSpace, InvestmentPlan};
use super::{BigMReport, CellProfit, PlannerResult};
use crate::clearing::BlockData;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation, Sense};
use crate::scenario::ScenarioSet;
use crate::system::{components, SystemModel};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilpOptions {
    /// Put each angle-reference dual in the angle dual row of every bus of
    /// its island instead of only the reference bus.
    pub literal_xi: bool,
}

/// What a linearized `u_hat * p` product stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProductKind {
    /// Candidate unit output injected at one bus.
    UnitDispatch,
    /// Candidate farm output injected at one bus.
    FarmDispatch,
    /// LMP seen by a candidate unit in its dual row.
    UnitPrice,
    /// LMP seen by a candidate farm in its dual row.
    FarmPrice,
    /// Capacity dual of a candidate unit.
    UnitCapDual,
    /// Capacity dual of a candidate farm.
    FarmCapDual,
}

impl ProductKind {
    /// Whether the lower / upper bound of the continuous factor is an
    /// assumed big-M value rather than a physical limit or a sign.
    pub fn big_m_sides(self) -> (bool, bool) {
        match self {
            ProductKind::UnitDispatch | ProductKind::FarmDispatch => (false, false),
            ProductKind::UnitPrice | ProductKind::FarmPrice => (true, true),
            ProductKind::UnitCapDual | ProductKind::FarmCapDual => (true, false),
        }
    }
}

/// One `z = chi * p` linearization block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub kind: ProductKind,
    /// Index into `MilpModel::blocks`.
    pub cell: usize,
    /// Model index of the unit or farm.
    pub asset: usize,
    /// Bus position of the siting option.
    pub bus: usize,
    pub chi: usize,
    pub p: usize,
    pub z: usize,
    pub lo: f64,
    pub hi: f64,
}

/// `(x[lmp] - cost) * x[qty]`, the unlinearized profit of one injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawTerm {
    pub lmp: usize,
    pub qty: usize,
    pub cost: f64,
}

/// Columns and rows of one (scenario, block, year) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockColumns {
    pub s: usize,
    pub b: usize,
    pub y: usize,
    /// `discount * probability * hours`.
    pub weight: f64,
    pub lambda: Vec<usize>,
    pub primal_cost: Vec<(usize, f64)>,
    pub dual_objective: Vec<(usize, f64)>,
    /// Linearized GENCO profit, $/h.
    pub profit: Vec<(usize, f64)>,
    pub raw: Vec<RawTerm>,
    pub strong_duality_row: usize,
}

impl BlockColumns {
    fn eval(terms: &[(usize, f64)], x: &[f64]) -> f64 {
        terms.iter().map(|&(c, a)| a * x[c]).sum()
    }

    pub fn profit_at(&self, x: &[f64]) -> f64 {
        Self::eval(&self.profit, x)
    }

    pub fn raw_profit_at(&self, x: &[f64]) -> f64 {
        self.raw.iter().map(|t| super::margin(x[t.lmp], t.cost) * x[t.qty]).sum()
    }

    pub fn primal_cost_at(&self, x: &[f64]) -> f64 {
        Self::eval(&self.primal_cost, x)
    }

    pub fn dual_objective_at(&self, x: &[f64]) -> f64 {
        Self::eval(&self.dual_objective, x)
    }
}

/// The single-level planning MILP.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub lp: LinearProgram,
    /// Binary build columns `u`.
    pub integers: Vec<usize>,
    /// `u[asset][k][y-1]` for the `k`-th allowed bus.
    pub u: Vec<Vec<Vec<usize>>>,
    pub u_hat: Vec<Vec<Vec<usize>>>,
    pub products: Vec<Product>,
    pub blocks: Vec<BlockColumns>,
    /// Discounted investment cost terms, already negated.
    pub invest_terms: Vec<(usize, f64)>,
    pub lambda_bound: f64,
    pub space: CandidateSpace,
    pub model: SystemModel,
    pub scenarios: ScenarioSet,
    pub options: MilpOptions,
}

/// Add `z = chi * p` for a binary `chi` and `p` in `[lo, hi]`.
///
/// With `r = p - z` eliminated the block reads
/// `chi*lo <= z <= chi*hi` and `(1-chi)*lo <= p - z <= (1-chi)*hi`.
pub fn linearize_binary_continuous(lp: &mut LinearProgram, chi: usize, p: usize, lo: f64, hi: f64) -> Result<usize> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::validation(format!("product needs finite bounds lo <= hi, got [{lo}, {hi}]")));
    }
    let z = lp.add_var(lo.min(0.0), hi.max(0.0), 0.0);
    lp.add_constraint([(z, 1.0), (chi, -lo)], Relation::Ge, 0.0);
    lp.add_constraint([(z, 1.0), (chi, -hi)], Relation::Le, 0.0);
    lp.add_constraint([(p, 1.0), (z, -1.0), (chi, lo)], Relation::Ge, lo);
    lp.add_constraint([(p, 1.0), (z, -1.0), (chi, hi)], Relation::Le, hi);
    Ok(z)
}

/// Write the linearized profit objective: per-cell profit terms weighted by
/// discount, probability and duration, minus discounted investment cost.
pub fn linearize_profit_terms(milp: &mut MilpModel) {
    let obj = &mut milp.lp.objective;
    obj.iter_mut().for_each(|c| *c = 0.0);
    for blk in &milp.blocks {
        for &(c, a) in &blk.profit {
            obj[c] += blk.weight * a;
        }
    }
    for &(c, a) in &milp.invest_terms {
        obj[c] += a;
    }
}

pub fn build_milp(model: &SystemModel, scenarios: &ScenarioSet, space: &CandidateSpace) -> Result<MilpModel> {
    build_milp_with(model, scenarios, space, MilpOptions::default())
}

pub fn build_milp_with(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    space: &CandidateSpace,
    options: MilpOptions,
) -> Result<MilpModel> {
    model.validate()?;
    scenarios.check(model)?;
    let cfg = &model.config;
    let years = cfg.years;
    if space.years != years {
        return Err(Error::validation("candidate space and model disagree on the horizon"));
    }
    let (ns, nbk) = (scenarios.len(), model.load_blocks.len());
    let cells = ns * nbk * years;
    if cells > cfg.max_scenarios {
        return Err(Error::Cap { what: "MILP scenario blocks".into(), size: cells, cap: cfg.max_scenarios });
    }
    let m_lambda = cfg.lmp_bound_factor * cfg.voll;
    let mut lp = LinearProgram::new(Sense::Maximize);
    let mut integers = Vec::new();

    let na = space.num_assets();
    let mut u = Vec::with_capacity(na);
    let mut u_hat = Vec::with_capacity(na);
    for a in 0..na {
        let nk = space.buses_of(a).len();
        let ua: Vec<Vec<usize>> = (0..nk).map(|_| (0..years).map(|_| lp.add_var(0.0, 1.0, 0.0)).collect()).collect();
        integers.extend(ua.iter().flatten().copied());
        let ha: Vec<Vec<usize>> = (0..nk).map(|_| (0..years).map(|_| lp.add_var(0.0, 1.0, 0.0)).collect()).collect();
        for k in 0..nk {
            for y in 0..years {
                let terms = std::iter::once((ha[k][y], 1.0)).chain((0..=y).map(|t| (ua[k][t], -1.0)));
                lp.add_constraint(terms, Relation::Eq, 0.0);
            }
        }
        lp.add_constraint(ua.iter().flatten().map(|&c| (c, 1.0)), Relation::Le, 1.0);
        u.push(ua);
        u_hat.push(ha);
    }
    let nu_assets = space.units.len();
    let mut invest_terms = Vec::new();
    for a in 0..na {
        let cost = if a < nu_assets {
            model.units[space.units[a]].invest_cost
        } else {
            model.wind_farms[space.farms[a - nu_assets]].invest_cost
        };
        for y in 1..=years {
            let df = cfg.discount_factor(y);
            for k in 0..u_hat[a].len() {
                invest_terms.push((u_hat[a][k][y - 1], -df * cost));
            }
        }
    }

    let mut milp = MilpModel {
        lp,
        integers,
        u,
        u_hat,
        products: Vec::new(),
        blocks: Vec::new(),
        invest_terms,
        lambda_bound: m_lambda,
        space: space.clone(),
        model: model.clone(),
        scenarios: scenarios.clone(),
        options,
    };
    for y in 1..=years {
        for s in 0..ns {
            for b in 0..nbk {
                add_cell(&mut milp, BlockData::new(model, scenarios, s, b, y))?;
            }
        }
    }
    linearize_profit_terms(&mut milp);
    Ok(milp)
}

fn add_cell(milp: &mut MilpModel, data: BlockData) -> Result<()> {
    let model = &milp.model;
    let space = &milp.space;
    let lp = &mut milp.lp;
    let products = &mut milp.products;
    let cell = milp.blocks.len();
    let (s, b, y) = (data.s, data.b, data.y);
    let m = milp.lambda_bound;
    let voll = model.config.voll;
    let nb = model.buses.len();
    let weight =
        model.config.discount_factor(y) * milp.scenarios.scenarios[s].probability * model.load_blocks[b].duration;

    let lambda: Vec<usize> = (0..nb).map(|_| lp.add_var(-m, m, 0.0)).collect();
    let mut at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut primal_cost = Vec::new();
    let mut dual_obj: Vec<(usize, f64)> =
        (0..nb).filter(|&n| data.load[n] > 0.0).map(|n| (lambda[n], data.load[n])).collect();
    let mut profit = Vec::new();
    let mut raw = Vec::new();

    let mut product = |lp: &mut LinearProgram, kind, asset, bus, chi, p, lo, hi| -> Result<usize> {
        let z = linearize_binary_continuous(lp, chi, p, lo, hi)?;
        products.push(Product { kind, cell, asset, bus, chi, p, z, lo, hi });
        Ok(z)
    };

    for (g, unit) in model.units.iter().enumerate() {
        let cap = data.unit_cap[g];
        if cap <= 0.0 {
            continue;
        }
        let c = unit.marginal_cost;
        let phi_lo = -(c.abs() + m);
        if !unit.is_candidate() {
            let Some(n) = unit.bus else { continue };
            let p = lp.add_var(0.0, cap, 0.0);
            at_bus[n].push(p);
            primal_cost.push((p, c));
            let fmax = lp.add_var(phi_lo, 0.0, 0.0);
            let fmin = lp.add_var(0.0, INF, 0.0);
            lp.add_constraint([(lambda[n], 1.0), (fmax, 1.0), (fmin, 1.0)], Relation::Eq, c);
            dual_obj.push((fmax, cap));
            if unit.owned {
                profit.push((fmax, -cap));
                raw.push(RawTerm { lmp: lambda[n], qty: p, cost: c });
            }
            continue;
        }
        let Some(a) = space.units.iter().position(|&x| x == g) else { continue };
        let hats: Vec<usize> = milp.u_hat[a].iter().map(|v| v[y - 1]).collect();
        let p = lp.add_var(0.0, cap, 0.0);
        primal_cost.push((p, c));
        lp.add_constraint(std::iter::once((p, 1.0)).chain(hats.iter().map(|&h| (h, -cap))), Relation::Le, 0.0);
        let fmax = lp.add_var(phi_lo, 0.0, 0.0);
        let fmin = lp.add_var(0.0, INF, 0.0);
        let mut row = vec![(fmax, 1.0), (fmin, 1.0)];
        for (k, &n) in space.unit_buses[a].iter().enumerate() {
            let zp = product(lp, ProductKind::UnitDispatch, g, n, hats[k], p, 0.0, cap)?;
            at_bus[n].push(zp);
            raw.push(RawTerm { lmp: lambda[n], qty: zp, cost: c });
            let zl = product(lp, ProductKind::UnitPrice, g, n, hats[k], lambda[n], -m, m)?;
            row.push((zl, 1.0));
            let zf = product(lp, ProductKind::UnitCapDual, g, n, hats[k], fmax, phi_lo, 0.0)?;
            dual_obj.push((zf, cap));
            profit.push((zf, -cap));
        }
        lp.add_constraint(row, Relation::Eq, c);
    }

    for (w, farm) in model.wind_farms.iter().enumerate() {
        if !farm.is_candidate() {
            let Some(n) = farm.bus else { continue };
            let avail = data.wind[w][n];
            if avail <= 0.0 {
                continue;
            }
            let p = lp.add_var(0.0, avail, 0.0);
            at_bus[n].push(p);
            let gmax = lp.add_var(-m, 0.0, 0.0);
            let gmin = lp.add_var(0.0, INF, 0.0);
            lp.add_constraint([(lambda[n], 1.0), (gmax, 1.0), (gmin, 1.0)], Relation::Eq, 0.0);
            dual_obj.push((gmax, avail));
            if farm.owned {
                profit.push((gmax, -avail));
                raw.push(RawTerm { lmp: lambda[n], qty: p, cost: 0.0 });
            }
            continue;
        }
        let Some(k0) = space.farms.iter().position(|&x| x == w) else { continue };
        let a = space.units.len() + k0;
        let buses = &space.farm_buses[k0];
        let caps: Vec<f64> = buses.iter().map(|&n| data.wind[w][n]).collect();
        let maxcap = caps.iter().copied().fold(0.0, f64::max);
        if maxcap <= 0.0 {
            continue;
        }
        let hats: Vec<usize> = milp.u_hat[a].iter().map(|v| v[y - 1]).collect();
        let p = lp.add_var(0.0, maxcap, 0.0);
        lp.add_constraint(
            std::iter::once((p, 1.0)).chain(hats.iter().zip(&caps).map(|(&h, &cap)| (h, -cap))),
            Relation::Le,
            0.0,
        );
        let gmax = lp.add_var(-m, 0.0, 0.0);
        let gmin = lp.add_var(0.0, INF, 0.0);
        let mut row = vec![(gmax, 1.0), (gmin, 1.0)];
        for (k, &n) in buses.iter().enumerate() {
            let zw = product(lp, ProductKind::FarmDispatch, w, n, hats[k], p, 0.0, maxcap)?;
            at_bus[n].push(zw);
            raw.push(RawTerm { lmp: lambda[n], qty: zw, cost: 0.0 });
            let zl = product(lp, ProductKind::FarmPrice, w, n, hats[k], lambda[n], -m, m)?;
            row.push((zl, 1.0));
            let zg = product(lp, ProductKind::FarmCapDual, w, n, hats[k], gmax, -m, 0.0)?;
            dual_obj.push((zg, caps[k]));
            profit.push((zg, -caps[k]));
        }
        lp.add_constraint(row, Relation::Eq, 0.0);
    }

    for n in 0..nb {
        let load = data.load[n];
        if load <= 0.0 {
            continue;
        }
        let sh = lp.add_var(0.0, load, 0.0);
        at_bus[n].push(sh);
        primal_cost.push((sh, voll));
        let bmax = lp.add_var(-INF, 0.0, 0.0);
        let bmin = lp.add_var(0.0, INF, 0.0);
        lp.add_constraint([(lambda[n], 1.0), (bmax, 1.0), (bmin, 1.0)], Relation::Eq, voll);
        dual_obj.push((bmax, load));
    }

    // Network: primal rows, then the angle dual rows.
    let delta: Vec<usize> = (0..nb).map(|_| lp.add_var(-INF, INF, 0.0)).collect();
    let mut balance: Vec<Vec<(usize, f64)>> = at_bus.iter().map(|v| v.iter().map(|&c| (c, 1.0)).collect()).collect();
    let mut angle_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    let mut flow_rows = Vec::new();
    for (l, line) in model.lines.iter().enumerate() {
        if !data.line_up[l] {
            continue;
        }
        let (a, bb, bs) = (line.from, line.to, line.susceptance);
        balance[a].extend([(delta[a], -bs), (delta[bb], bs)]);
        balance[bb].extend([(delta[a], bs), (delta[bb], -bs)]);
        flow_rows.push(([(delta[a], bs), (delta[bb], -bs)], [(delta[a], -bs), (delta[bb], bs)], line.capacity));
        let tf = lp.add_var(-INF, 0.0, 0.0);
        let tb = lp.add_var(-INF, 0.0, 0.0);
        dual_obj.push((tf, line.capacity));
        dual_obj.push((tb, line.capacity));
        angle_rows[a].extend([(lambda[a], -bs), (lambda[bb], bs), (tf, bs), (tb, -bs)]);
        angle_rows[bb].extend([(lambda[a], bs), (lambda[bb], -bs), (tf, -bs), (tb, bs)]);
    }
    for (n, terms) in balance.into_iter().enumerate() {
        lp.add_constraint(terms, Relation::Eq, data.load[n]);
    }
    for (fwd, bwd, cap) in flow_rows {
        lp.add_constraint(fwd, Relation::Le, cap);
        lp.add_constraint(bwd, Relation::Le, cap);
    }
    let comp = if milp.options.literal_xi {
        components(nb, model.lines.iter().zip(&data.line_up).filter(|(_, &up)| up).map(|(l, _)| (l.from, l.to)))
    } else {
        Vec::new()
    };
    for &p in &data.pins {
        lp.add_constraint([(delta[p], 1.0)], Relation::Eq, 0.0);
        let xi = lp.add_var(-INF, INF, 0.0);
        if milp.options.literal_xi {
            for n in (0..nb).filter(|&n| comp[n] == comp[p]) {
                angle_rows[n].push((xi, 1.0));
            }
        } else {
            angle_rows[p].push((xi, 1.0));
        }
    }
    for terms in angle_rows {
        lp.add_constraint(terms, Relation::Eq, 0.0);
    }

    let sd =
        lp.add_constraint(primal_cost.iter().copied().chain(dual_obj.iter().map(|&(c, a)| (c, -a))), Relation::Eq, 0.0);
    milp.blocks.push(BlockColumns {
        s,
        b,
        y,
        weight,
        lambda,
        primal_cost,
        dual_objective: dual_obj,
        profit,
        raw,
        strong_duality_row: sd,
    });
    Ok(())
}

impl MilpModel {
    /// Option vector of the build columns in `x`, see [`CandidateSpace::option_of`].
    pub fn options_of(&self, x: &[f64]) -> Vec<usize> {
        self.u
            .iter()
            .map(|ua| {
                for (k, uk) in ua.iter().enumerate() {
                    for (y, &c) in uk.iter().enumerate() {
                        if x[c] > 0.5 {
                            return 1 + k * self.space.years + y;
                        }
                    }
                }
                0
            })
            .collect()
    }

    pub fn plan_of(&self, x: &[f64]) -> InvestmentPlan {
        self.space.plan_from_options(&self.model, &self.options_of(x))
    }

    /// Discounted investment cost at `x`, as a negative number.
    pub fn invest_at(&self, x: &[f64]) -> f64 {
        self.invest_terms.iter().map(|&(c, a)| a * x[c]).sum()
    }

    pub fn solve(&self, opts: &BnbOptions) -> Result<PlannerResult> {
        let out = branch_and_bound(&self.lp, &self.integers, opts, |x| self.options_of(x))?
            .ok_or_else(|| Error::Solver("planning MILP infeasible although the empty plan is feasible".into()))?;
        let x = &out.x;
        let plan = self.plan_of(x);
        let mut trace = Vec::with_capacity(self.blocks.len());
        let mut max_dual = 0.0f64;
        let mut raw_total = self.invest_at(x);
        for blk in &self.blocks {
            trace.push(CellProfit { s: blk.s, b: blk.b, y: blk.y, profit: blk.profit_at(x), weight: blk.weight });
            let p = blk.primal_cost_at(x);
            max_dual = max_dual.max((p - blk.dual_objective_at(x)).abs() / (1.0 + p.abs()));
            raw_total += blk.weight * blk.raw_profit_at(x);
        }
        let fresh = evaluate_plan(&self.model, &self.scenarios, &plan)?;
        let scale = 1.0 + out.objective.abs();
        let lin_res = (out.objective - raw_total).abs().max((out.objective - fresh.objective).abs()) / scale;
        let big_m = self.big_m_report(x, &plan)?;
        // Reported in the bilinear form, which carries less round-off than
        // the linearized relaxation value.
        Ok(PlannerResult {
            method: "milp".into(),
            plan,
            objective: raw_total,
            bound: out.bound,
            gap: (out.bound - out.objective).max(0.0) / scale,
            nodes: out.nodes,
            profit_trace: trace,
            big_m,
            max_duality_residual: max_dual,
            max_linearization_residual: lin_res,
            timed_out: out.timed_out,
        })
    }

    /// Check every live big-M bound at `x`. Cells where one is touched are
    /// re-evaluated with ten-fold price bounds; the report fails only when
    /// that changes the cell's profit.
    pub fn big_m_report(&self, x: &[f64], plan: &InvestmentPlan) -> Result<BigMReport> {
        let near = |v: f64, bound: f64| (v - bound).abs() <= 1e-6 * (1.0 + bound.abs());
        let mut report = BigMReport { ok: true, ..Default::default() };
        let mut flagged = BTreeSet::new();
        for pr in &self.products {
            let (lo_m, hi_m) = pr.kind.big_m_sides();
            if x[pr.chi] < 0.5 || !(lo_m || hi_m) {
                continue;
            }
            report.checked += 1;
            let v = x[pr.p];
            if (lo_m && near(v, pr.lo)) || (hi_m && near(v, pr.hi)) {
                report.at_bound += 1;
                flagged.insert(pr.cell);
            }
        }
        for (cell, blk) in self.blocks.iter().enumerate() {
            for &c in &blk.lambda {
                report.checked += 1;
                if near(x[c].abs(), self.lambda_bound) {
                    report.at_bound += 1;
                    flagged.insert(cell);
                }
            }
        }
        let factor = self.model.config.lmp_bound_factor;
        for cell in flagged {
            let blk = &self.blocks[cell];
            let base = cell_profit(&self.model, &self.scenarios, plan, blk.s, blk.b, blk.y, factor)?;
            let wide = cell_profit(&self.model, &self.scenarios, plan, blk.s, blk.b, blk.y, 10.0 * factor)?;
            report.recertified_cells += 1;
            match (base, wide) {
                (Some(p), Some(q)) if (p.profit - q.profit).abs() <= 1e-6 * (1.0 + p.profit.abs()) => {
                    report.details.push(format!(
                        "s={} b={} y={}: bound touched, profit unchanged with ten-fold bounds",
                        blk.s, blk.b, blk.y
                    ));
                }
                (p, q) => {
                    report.ok = false;
                    report.details.push(format!(
                        "s={} b={} y={}: big-M bound too tight, profit {:?} vs {:?} with ten-fold bounds",
                        blk.s,
                        blk.b,
                        blk.y,
                        p.map(|v| v.profit),
                        q.map(|v| v.profit)
                    ));
                }
            }
        }
        Ok(report)
    }
}

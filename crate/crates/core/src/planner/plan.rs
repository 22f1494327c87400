use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::io::Table;
use crate::system::SystemModel;

/// Where and when one candidate asset is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Build {
    /// Bus position.
    pub bus: usize,
    /// 1-based year of construction.
    pub year: usize,
}

/// Upper-level decision: at most one build per candidate asset.
///
/// `units[g]` and `farms[w]` are indexed like `SystemModel::units` and
/// `SystemModel::wind_farms`; entries of existing assets stay `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InvestmentPlan {
    pub units: Vec<Option<Build>>,
    pub farms: Vec<Option<Build>>,
}

impl InvestmentPlan {
    pub fn empty(model: &SystemModel) -> Self {
        InvestmentPlan { units: vec![None; model.units.len()], farms: vec![None; model.wind_farms.len()] }
    }

    /// Bus position where unit `g` is available in year `y`, if built by then.
    pub fn unit_bus(&self, g: usize, y: usize) -> Option<usize> {
        self.units[g].filter(|b| b.year <= y).map(|b| b.bus)
    }

    pub fn farm_bus(&self, w: usize, y: usize) -> Option<usize> {
        self.farms[w].filter(|b| b.year <= y).map(|b| b.bus)
    }

    /// Cumulative build indicator `u_hat` of unit `g` at bus `n` in year `y`.
    pub fn u_hat_unit(&self, g: usize, n: usize, y: usize) -> f64 {
        if self.unit_bus(g, y) == Some(n) {
            1.0
        } else {
            0.0
        }
    }

    pub fn u_hat_farm(&self, w: usize, n: usize, y: usize) -> f64 {
        if self.farm_bus(w, y) == Some(n) {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.units.iter().chain(&self.farms).all(Option::is_none)
    }

    /// Bus ids of all builds in a given year, sorted, e.g. `n2,n7`.
    pub fn describe_year(&self, model: &SystemModel, y: usize) -> String {
        let mut ids: Vec<usize> = self
            .units
            .iter()
            .chain(&self.farms)
            .flatten()
            .filter(|b| b.year == y)
            .map(|b| model.buses[b.bus].id)
            .collect();
        ids.sort_unstable();
        if ids.is_empty() {
            return "-".into();
        }
        ids.iter().map(|i| format!("n{i}")).collect::<Vec<_>>().join(",")
    }

    /// All builds, one `n<bus>` per asset, with `@y<year>` when the horizon
    /// has more than one year.
    pub fn describe(&self, model: &SystemModel) -> String {
        let mut items: Vec<(usize, usize)> =
            self.units.iter().chain(&self.farms).flatten().map(|b| (b.year, model.buses[b.bus].id)).collect();
        items.sort_unstable();
        if items.is_empty() {
            return "-".into();
        }
        let multi = model.config.years > 1;
        let mut s = String::new();
        for (k, (y, id)) in items.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let _ = write!(s, "n{id}");
            if multi {
                let _ = write!(s, "@y{y}");
            }
        }
        s
    }
}

/// The siting options the planner may choose from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpace {
    /// Model indices of candidate units, in model order.
    pub units: Vec<usize>,
    /// Allowed bus positions per candidate unit.
    pub unit_buses: Vec<Vec<usize>>,
    pub farms: Vec<usize>,
    pub farm_buses: Vec<Vec<usize>>,
    pub years: usize,
}

impl CandidateSpace {
    pub fn from_model(model: &SystemModel) -> Self {
        let (units, unit_buses) = model.candidate_units().map(|(g, u)| (g, u.candidate_buses.clone())).unzip();
        let (farms, farm_buses) = model.candidate_farms().map(|(w, f)| (w, f.candidate_buses.clone())).unzip();
        CandidateSpace { units, unit_buses, farms, farm_buses, years: model.config.years }
    }

    /// Override candidate bus sets from a CSV with columns `id` and
    /// `candidate_buses` (`;`-separated bus ids). Unlisted assets keep
    /// their model sets.
    pub fn load_overrides(model: &SystemModel, path: &Path) -> Result<Self> {
        let mut space = Self::from_model(model);
        let t = Table::read(path)?;
        t.require(&["id", "candidate_buses"])?;
        for row in &t.rows {
            let id = t.raw(row, "id");
            let mut buses = Vec::new();
            for part in t.raw(row, "candidate_buses").split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let bid: usize = part.parse().map_err(|_| t.err(row.0, format!("bad bus `{part}`")))?;
                buses.push(model.bus_index(bid).ok_or_else(|| t.err(row.0, format!("unknown bus {bid}")))?);
            }
            buses.sort_unstable();
            buses.dedup();
            if buses.is_empty() {
                return Err(t.err(row.0, "empty candidate bus list"));
            }
            if let Some(k) = space.units.iter().position(|&g| model.units[g].id == id) {
                space.unit_buses[k] = buses;
            } else if let Some(k) = space.farms.iter().position(|&w| model.wind_farms[w].id == id) {
                space.farm_buses[k] = buses;
            } else {
                return Err(t.err(row.0, format!("`{id}` is not a candidate asset")));
            }
        }
        Ok(space)
    }

    pub fn num_assets(&self) -> usize {
        self.units.len() + self.farms.len()
    }

    /// Number of choices per asset: not building plus one per (bus, year).
    pub fn options(&self, asset: usize) -> usize {
        1 + self.buses_of(asset).len() * self.years
    }

    pub fn buses_of(&self, asset: usize) -> &[usize] {
        if asset < self.units.len() {
            &self.unit_buses[asset]
        } else {
            &self.farm_buses[asset - self.units.len()]
        }
    }

    /// Count of binary columns `u` the planner creates.
    pub fn num_binaries(&self) -> usize {
        (0..self.num_assets()).map(|a| self.options(a) - 1).sum()
    }

    /// Total number of plans, saturating.
    pub fn num_plans(&self) -> usize {
        (0..self.num_assets()).fold(1usize, |acc, a| acc.saturating_mul(self.options(a)))
    }

    /// Option `0` is "not built"; option `1 + k*years + (y-1)` builds at the
    /// `k`-th allowed bus in year `y`.
    pub fn option_of(&self, asset: usize, build: Option<Build>) -> usize {
        match build {
            None => 0,
            Some(b) => {
                let k = self.buses_of(asset).iter().position(|&n| n == b.bus).expect("bus in candidate space");
                1 + k * self.years + (b.year - 1)
            }
        }
    }

    pub fn build_of(&self, asset: usize, option: usize) -> Option<Build> {
        if option == 0 {
            return None;
        }
        let o = option - 1;
        Some(Build { bus: self.buses_of(asset)[o / self.years], year: o % self.years + 1 })
    }

    pub fn plan_from_options(&self, model: &SystemModel, options: &[usize]) -> InvestmentPlan {
        let mut plan = InvestmentPlan::empty(model);
        for (a, &o) in options.iter().enumerate() {
            let b = self.build_of(a, o);
            if a < self.units.len() {
                plan.units[self.units[a]] = b;
            } else {
                plan.farms[self.farms[a - self.units.len()]] = b;
            }
        }
        plan
    }

    pub fn options_of_plan(&self, plan: &InvestmentPlan) -> Vec<usize> {
        let mut v: Vec<usize> = self.units.iter().enumerate().map(|(a, &g)| self.option_of(a, plan.units[g])).collect();
        let nu = self.units.len();
        v.extend(self.farms.iter().enumerate().map(|(k, &w)| self.option_of(nu + k, plan.farms[w])));
        v
    }

    /// Check a plan only builds where the space allows.
    pub fn contains(&self, model: &SystemModel, plan: &InvestmentPlan) -> Result<()> {
        let check = |asset: usize, b: Option<Build>, name: &str| -> Result<()> {
            if let Some(b) = b {
                if !self.buses_of(asset).contains(&b.bus) || b.year == 0 || b.year > self.years {
                    return Err(Error::validation(format!("plan builds {name} outside its candidate space")));
                }
            }
            Ok(())
        };
        for (a, &g) in self.units.iter().enumerate() {
            check(a, plan.units[g], &model.units[g].id)?;
        }
        for (k, &w) in self.farms.iter().enumerate() {
            check(self.units.len() + k, plan.farms[w], &model.wind_farms[w].id)?;
        }
        for (g, b) in plan.units.iter().enumerate() {
            if b.is_some() && !self.units.contains(&g) {
                return Err(Error::validation(format!("plan builds non-candidate unit {}", model.units[g].id)));
            }
        }
        for (w, b) in plan.farms.iter().enumerate() {
            if b.is_some() && !self.farms.contains(&w) {
                return Err(Error::validation(format!("plan builds non-candidate farm {}", model.wind_farms[w].id)));
            }
        }
        Ok(())
    }

    /// Lexicographic order of plans by option vector.
    pub fn cmp_plans(&self, a: &InvestmentPlan, b: &InvestmentPlan) -> Ordering {
        self.options_of_plan(a).cmp(&self.options_of_plan(b))
    }
}

/// Plans serialize to JSON lines as lists of `{asset, bus, year}` with bus ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub asset: String,
    pub bus: usize,
    pub year: usize,
}

impl InvestmentPlan {
    pub fn entries(&self, model: &SystemModel) -> Vec<PlanEntry> {
        let mut out = Vec::new();
        for (g, b) in self.units.iter().enumerate() {
            if let Some(b) = b {
                out.push(PlanEntry { asset: model.units[g].id.clone(), bus: model.buses[b.bus].id, year: b.year });
            }
        }
        for (w, b) in self.farms.iter().enumerate() {
            if let Some(b) = b {
                out.push(PlanEntry { asset: model.wind_farms[w].id.clone(), bus: model.buses[b.bus].id, year: b.year });
            }
        }
        out
    }

    pub fn from_entries(model: &SystemModel, entries: &[PlanEntry]) -> Result<Self> {
        let mut plan = InvestmentPlan::empty(model);
        for e in entries {
            let bus =
                model.bus_index(e.bus).ok_or_else(|| Error::validation(format!("plan: unknown bus {}", e.bus)))?;
            let build = Some(Build { bus, year: e.year });
            if let Some(g) = model.units.iter().position(|u| u.id == e.asset) {
                if plan.units[g].is_some() {
                    return Err(Error::validation(format!("plan: {} built twice", e.asset)));
                }
                plan.units[g] = build;
            } else if let Some(w) = model.wind_farms.iter().position(|f| f.id == e.asset) {
                if plan.farms[w].is_some() {
                    return Err(Error::validation(format!("plan: {} built twice", e.asset)));
                }
                plan.farms[w] = build;
            } else {
                return Err(Error::validation(format!("plan: unknown asset {}", e.asset)));
            }
        }
        Ok(plan)
    }
}

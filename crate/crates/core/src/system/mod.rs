//! Static power-system data: buses, lines, units, wind farms, load blocks and
//! the study configuration, plus the derived quantities other modules use.

mod config;
pub(crate) mod io;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use config::StudyConfig;
pub use io::{load_system, load_system_with, save_system};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number as it appears in the input files.
    pub id: usize,
    /// Year-1 peak demand, MW. Later years scale by the configured growth.
    pub peak_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    /// Bus positions (indices into `SystemModel::buses`).
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub capacity: f64,
    pub for_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalUnit {
    pub id: String,
    /// Bus position for existing units; `None` marks a candidate.
    pub bus: Option<usize>,
    pub capacity: f64,
    pub marginal_cost: f64,
    pub for_rate: f64,
    pub owned: bool,
    /// Bus positions where a candidate may be sited.
    pub candidate_buses: Vec<usize>,
    /// Annualized investment cost, $/yr, identical at every bus and year.
    pub invest_cost: f64,
}

impl ConventionalUnit {
    pub fn is_candidate(&self) -> bool {
        self.bus.is_none()
    }
}

/// Single-turbine power curve, piecewise linear in wind speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// `(speed m/s, power MW)` with strictly increasing speeds starting at 0.
    /// The last speed is the cut-out speed; output is zero beyond it.
    pub points: Vec<(f64, f64)>,
}

impl PowerCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: &str| Err(Error::validation(format!("power curve: {m}")));
        if points.len() < 2 {
            return bad("needs at least two points");
        }
        if points[0].0 != 0.0 {
            return bad("first speed must be 0");
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite() || p.1 < 0.0) {
            return bad("speeds and outputs must be finite and outputs nonnegative");
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("speeds must be strictly increasing");
        }
        let curve = PowerCurve { points };
        let rated_at = curve.rated_index();
        if curve.points[..=rated_at].windows(2).any(|w| w[1].1 < w[0].1) {
            return bad("output must be nondecreasing up to rated speed");
        }
        if curve.rating() <= 0.0 {
            return bad("rating must be positive");
        }
        Ok(curve)
    }

    fn rated_index(&self) -> usize {
        let r = self.rating();
        self.points.iter().position(|p| p.1 == r).unwrap_or(0)
    }

    pub fn rating(&self) -> f64 {
        self.points.iter().fold(0.0f64, |a, p| a.max(p.1))
    }

    pub fn cut_out(&self) -> f64 {
        self.points.last().map(|p| p.0).unwrap_or(0.0)
    }

    /// Output in MW of one turbine at `speed`.
    pub fn power(&self, speed: f64) -> f64 {
        if !(speed >= 0.0) || speed > self.cut_out() {
            return 0.0;
        }
        let k = self.points.partition_point(|p| p.0 <= speed);
        if k == self.points.len() {
            return self.points[k - 1].1;
        }
        let (s0, p0) = self.points[k - 1];
        let (s1, p1) = self.points[k];
        p0 + (p1 - p0) * (speed - s0) / (s1 - s0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub id: String,
    pub bus: Option<usize>,
    pub n_turbines: u32,
    pub power_curve: PowerCurve,
    pub owned: bool,
    pub candidate_buses: Vec<usize>,
    pub invest_cost: f64,
}

impl WindFarm {
    pub fn is_candidate(&self) -> bool {
        self.bus.is_none()
    }

    pub fn capacity(&self) -> f64 {
        self.n_turbines as f64 * self.power_curve.rating()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadBlock {
    pub id: String,
    /// Fraction of the peak.
    pub level: f64,
    /// Hours per year.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub buses: Vec<Bus>,
    pub lines: Vec<TransmissionLine>,
    pub units: Vec<ConventionalUnit>,
    pub wind_farms: Vec<WindFarm>,
    pub load_blocks: Vec<LoadBlock>,
    pub config: StudyConfig,
}

impl SystemModel {
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.binary_search_by_key(&id, |b| b.id).ok()
    }

    pub fn slack_index(&self) -> usize {
        self.bus_index(self.config.slack_bus).expect("validated slack bus")
    }

    pub fn existing_units(&self) -> impl Iterator<Item = (usize, &ConventionalUnit)> {
        self.units.iter().enumerate().filter(|(_, u)| !u.is_candidate())
    }

    pub fn candidate_units(&self) -> impl Iterator<Item = (usize, &ConventionalUnit)> {
        self.units.iter().enumerate().filter(|(_, u)| u.is_candidate())
    }

    pub fn existing_farms(&self) -> impl Iterator<Item = (usize, &WindFarm)> {
        self.wind_farms.iter().enumerate().filter(|(_, w)| !w.is_candidate())
    }

    pub fn candidate_farms(&self) -> impl Iterator<Item = (usize, &WindFarm)> {
        self.wind_farms.iter().enumerate().filter(|(_, w)| w.is_candidate())
    }

    pub fn num_years(&self) -> usize {
        self.config.years
    }

    /// Demand at bus `n`, block `b`, 1-based year `y`, MW.
    pub fn block_load(&self, n: usize, b: usize, y: usize) -> f64 {
        assert!(y >= 1 && y <= self.config.years, "year {y} outside 1..={}", self.config.years);
        self.load_blocks[b].level * self.buses[n].peak_load * self.config.growth_factor(y)
    }

    pub fn total_hours(&self) -> f64 {
        self.load_blocks.iter().map(|b| b.duration).sum()
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let nb = self.buses.len();
        if nb == 0 {
            return Err(Error::validation("no buses"));
        }
        if self.buses.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::validation("bus ids must be unique and sorted"));
        }
        for b in &self.buses {
            if !(b.peak_load >= 0.0) || !b.peak_load.is_finite() {
                return Err(Error::validation(format!("bus {}: peak load must be nonnegative", b.id)));
            }
        }
        if self.bus_index(self.config.slack_bus).is_none() {
            return Err(Error::validation(format!("slack bus {} does not exist", self.config.slack_bus)));
        }
        for (k, l) in self.lines.iter().enumerate() {
            let name = format!("line {}", k + 1);
            if l.from >= nb || l.to >= nb {
                return Err(Error::validation(format!("{name}: dangling bus reference")));
            }
            if l.from == l.to {
                return Err(Error::validation(format!("{name}: both ends at bus {}", self.buses[l.from].id)));
            }
            if !(l.susceptance > 0.0) || !l.susceptance.is_finite() {
                return Err(Error::validation(format!("{name}: susceptance must be positive")));
            }
            if !(l.capacity > 0.0) || !l.capacity.is_finite() {
                return Err(Error::validation(format!("{name}: capacity must be positive")));
            }
            if !(0.0..1.0).contains(&l.for_rate) {
                return Err(Error::validation(format!("{name}: outage rate must lie in [0, 1)")));
            }
        }
        let mut ids = HashSet::new();
        let mut max_cost = 0.0f64;
        for u in &self.units {
            if !ids.insert(u.id.as_str()) {
                return Err(Error::validation(format!("duplicate unit id {}", u.id)));
            }
            if !(u.capacity > 0.0) || !u.capacity.is_finite() {
                return Err(Error::validation(format!("unit {}: capacity must be positive", u.id)));
            }
            if !(u.marginal_cost >= 0.0) || !u.marginal_cost.is_finite() {
                return Err(Error::validation(format!("unit {}: marginal cost must be nonnegative", u.id)));
            }
            if !(0.0..=1.0).contains(&u.for_rate) {
                return Err(Error::validation(format!("unit {}: outage rate must lie in [0, 1]", u.id)));
            }
            max_cost = max_cost.max(u.marginal_cost);
            check_siting(&u.id, u.bus, &u.candidate_buses, u.invest_cost, nb)?;
        }
        let mut farm_ids = HashSet::new();
        for w in &self.wind_farms {
            if !farm_ids.insert(w.id.as_str()) {
                return Err(Error::validation(format!("duplicate wind farm id {}", w.id)));
            }
            if w.n_turbines == 0 {
                return Err(Error::validation(format!("wind farm {}: needs at least one turbine", w.id)));
            }
            check_siting(&w.id, w.bus, &w.candidate_buses, w.invest_cost, nb)?;
        }
        if !(self.config.voll > max_cost) {
            return Err(Error::validation(format!(
                "voll {} must exceed the largest marginal cost {max_cost}",
                self.config.voll
            )));
        }
        if self.load_blocks.is_empty() {
            return Err(Error::validation("no load blocks"));
        }
        for b in &self.load_blocks {
            if !(b.level > 0.0 && b.level <= 1.0) {
                return Err(Error::validation(format!("block {}: level must lie in (0, 1]", b.id)));
            }
            if !(b.duration > 0.0) || !b.duration.is_finite() {
                return Err(Error::validation(format!("block {}: duration must be positive", b.id)));
            }
        }
        if self.load_blocks.windows(2).any(|w| w[1].level < w[0].level) {
            return Err(Error::validation("load blocks must be sorted by nondecreasing level"));
        }
        let comp = components(nb, self.lines.iter().map(|l| (l.from, l.to)));
        if let Some(n) = comp.iter().position(|&c| c != 0) {
            return Err(Error::validation(format!(
                "network is disconnected: bus {} is unreachable from bus {}",
                self.buses[n].id, self.buses[0].id
            )));
        }
        Ok(())
    }
}

fn check_siting(id: &str, bus: Option<usize>, candidates: &[usize], invest: f64, nb: usize) -> Result<()> {
    match bus {
        Some(b) => {
            if b >= nb {
                return Err(Error::validation(format!("{id}: dangling bus reference")));
            }
            if !candidates.is_empty() {
                return Err(Error::validation(format!("{id}: an existing asset cannot list candidate buses")));
            }
        }
        None => {
            if candidates.is_empty() {
                return Err(Error::validation(format!("{id}: candidate needs at least one candidate bus")));
            }
            if candidates.iter().any(|&b| b >= nb) {
                return Err(Error::validation(format!("{id}: dangling candidate bus reference")));
            }
            if candidates.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!("{id}: candidate buses must be distinct")));
            }
            if !(invest >= 0.0) || !invest.is_finite() {
                return Err(Error::validation(format!("{id}: investment cost must be nonnegative")));
            }
        }
    }
    Ok(())
}

/// Annualized investment cost in $/yr of `capacity_mw` priced at
/// `rate_per_kw` $/kW and paid back linearly over `payback_years`.
pub fn annualized_invest_cost(capacity_mw: f64, rate_per_kw: f64, payback_years: f64) -> Result<f64> {
    if !(capacity_mw > 0.0 && rate_per_kw > 0.0 && payback_years > 0.0) {
        return Err(Error::validation("capacity, rate and payback period must all be positive"));
    }
    Ok(capacity_mw * 1000.0 * rate_per_kw / payback_years)
}

/// Merge sorted blocks into `k` groups of consecutive blocks. Each group
/// keeps the summed duration and the duration-weighted mean level, so total
/// hours and energy are preserved.
pub fn coarsen_blocks(blocks: &[LoadBlock], k: usize) -> Vec<LoadBlock> {
    if k == 0 || k >= blocks.len() {
        return blocks.to_vec();
    }
    let n = blocks.len();
    (0..k)
        .map(|g| {
            let (lo, hi) = (g * n / k, (g + 1) * n / k);
            let group = &blocks[lo..hi];
            let hours: f64 = group.iter().map(|b| b.duration).sum();
            let energy: f64 = group.iter().map(|b| b.duration * b.level).sum();
            LoadBlock {
                id: format!("{}-{}", group[0].id, group[group.len() - 1].id),
                level: energy / hours,
                duration: hours,
            }
        })
        .collect()
}

/// Connected-component label per bus; each label is the lowest bus position
/// in its component.
pub fn components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

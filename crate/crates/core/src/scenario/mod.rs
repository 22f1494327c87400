//! Joint scenario sets: equipment availability under single (or bounded
//! multiple) outages, wind speed scenarios, and their product.

mod wind;

use serde::{Deserialize, Serialize};

pub use wind::{
    decorrelate, estimate_correlation, load_wind_targets, read_wind_scenarios, synthesize_correlated_wind, wind_power,
    wind_scenarios_csv, write_wind_scenarios, WindScenario, WindSet, WindTargets,
};

use crate::error::{Error, Result};
use crate::system::SystemModel;

/// One joint state of the system with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub probability: f64,
    /// Availability of every unit in `SystemModel::units` order, candidates
    /// included.
    pub unit_up: Vec<bool>,
    /// Availability of every line in `SystemModel::lines` order.
    pub line_up: Vec<bool>,
    /// Wind speed, m/s, at each site of the owning set's `wind_sites`.
    pub wind_speed: Vec<f64>,
}

impl Scenario {
    pub fn outages(&self) -> usize {
        self.unit_up.iter().chain(&self.line_up).filter(|u| !**u).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    /// Bus ids of the wind measurement sites.
    pub wind_sites: Vec<usize>,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// The single all-available scenario with no wind data.
    pub fn base(model: &SystemModel) -> ScenarioSet {
        ScenarioSet {
            wind_sites: vec![],
            scenarios: vec![Scenario {
                probability: 1.0,
                unit_up: vec![true; model.units.len()],
                line_up: vec![true; model.lines.len()],
                wind_speed: vec![],
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.scenarios.iter().map(|s| s.probability).sum()
    }

    /// Available wind power, MW, of farm `farm` if it sits at bus position
    /// `bus` in scenario `s`. Zero when the set carries no wind data.
    pub fn wind_available(&self, model: &SystemModel, s: usize, farm: usize, bus: usize) -> f64 {
        let id = model.buses[bus].id;
        match self.wind_sites.iter().position(|&w| w == id) {
            Some(k) => wind_power(&model.wind_farms[farm], self.scenarios[s].wind_speed[k]),
            None => 0.0,
        }
    }

    /// Check the set is usable with `model`: vector lengths match, the
    /// probabilities are a distribution, and every bus a wind farm may occupy
    /// has a wind site.
    pub fn check(&self, model: &SystemModel) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::validation("empty scenario set"));
        }
        for s in &self.scenarios {
            if s.unit_up.len() != model.units.len() || s.line_up.len() != model.lines.len() {
                return Err(Error::validation("scenario availability vectors do not match the system"));
            }
            if s.wind_speed.len() != self.wind_sites.len() {
                return Err(Error::validation("scenario wind vector does not match the site list"));
            }
            if !(s.probability >= 0.0) {
                return Err(Error::validation("negative scenario probability"));
            }
        }
        if (self.total_probability() - 1.0).abs() > 1e-9 {
            return Err(Error::validation("scenario probabilities do not sum to 1"));
        }
        for w in &model.wind_farms {
            let buses: Vec<usize> = w.bus.into_iter().chain(w.candidate_buses.iter().copied()).collect();
            for b in buses {
                let id = model.buses[b].id;
                if !self.wind_sites.contains(&id) {
                    return Err(Error::validation(format!("no wind data for bus {id} used by farm {}", w.id)));
                }
            }
        }
        Ok(())
    }
}

struct Device {
    unit: Option<usize>,
    line: Option<usize>,
    for_rate: f64,
}

fn failable_devices(model: &SystemModel) -> Result<Vec<Device>> {
    let mut out = Vec::new();
    for (k, u) in model.units.iter().enumerate() {
        if u.for_rate >= 1.0 {
            return Err(Error::validation(format!("unit {} has an outage rate of 1", u.id)));
        }
        if u.for_rate > 0.0 {
            out.push(Device { unit: Some(k), line: None, for_rate: u.for_rate });
        }
    }
    for (k, l) in model.lines.iter().enumerate() {
        if l.for_rate >= 1.0 {
            return Err(Error::validation(format!("line {} has an outage rate of 1", k + 1)));
        }
        if l.for_rate > 0.0 {
            out.push(Device { unit: None, line: Some(k), for_rate: l.for_rate });
        }
    }
    Ok(out)
}

/// Base scenario plus one scenario per device with a nonzero outage rate.
/// Each raw probability is the product of the failure rates of the failed
/// devices and the availabilities of the rest, normalized over the set.
pub fn enumerate_n_minus_1(model: &SystemModel) -> Result<ScenarioSet> {
    enumerate_outages(model, 1)
}

/// Every combination of at most `k` simultaneous device outages, normalized
/// as in [`enumerate_n_minus_1`]. Fails when the set would exceed
/// `config.max_scenarios`.
pub fn enumerate_outages(model: &SystemModel, k: usize) -> Result<ScenarioSet> {
    let devices = failable_devices(model)?;
    let d = devices.len();
    let k = k.min(d);
    let mut size = 0usize;
    let mut binom = 1usize;
    for j in 0..=k {
        if j > 0 {
            binom = binom.saturating_mul(d - j + 1) / j;
        }
        size = size.saturating_add(binom);
    }
    let cap = model.config.max_scenarios;
    if size > cap {
        return Err(Error::Cap { what: "outage scenario set".into(), size, cap });
    }
    let log_up: f64 = devices.iter().map(|x| (1.0 - x.for_rate).ln()).sum();
    let base = ScenarioSet::base(model).scenarios.remove(0);
    let mut scenarios = Vec::with_capacity(size);
    let mut chosen: Vec<usize> = Vec::new();
    fn rec(
        start: usize,
        left: usize,
        chosen: &mut Vec<usize>,
        devices: &[Device],
        base: &Scenario,
        log_up: f64,
        out: &mut Vec<Scenario>,
    ) {
        let mut s = base.clone();
        let mut lp = log_up;
        for &c in chosen.iter() {
            let dev = &devices[c];
            lp += dev.for_rate.ln() - (1.0 - dev.for_rate).ln();
            if let Some(u) = dev.unit {
                s.unit_up[u] = false;
            }
            if let Some(l) = dev.line {
                s.line_up[l] = false;
            }
        }
        s.probability = lp.exp();
        out.push(s);
        if left == 0 {
            return;
        }
        for c in start..devices.len() {
            chosen.push(c);
            rec(c + 1, left - 1, chosen, devices, base, log_up, out);
            chosen.pop();
        }
    }
    rec(0, k, &mut chosen, &devices, &base, log_up, &mut scenarios);
    normalize(&mut scenarios);
    Ok(ScenarioSet { wind_sites: vec![], scenarios })
}

fn normalize(scenarios: &mut [Scenario]) {
    let mut p: Vec<f64> = scenarios.iter().map(|s| s.probability).collect();
    p.sort_by(f64::total_cmp);
    let total: f64 = p.iter().sum();
    for s in scenarios.iter_mut() {
        s.probability /= total;
    }
}

/// Cartesian product of an availability set and a wind set, with product
/// probabilities. Availability varies slowest.
pub fn combine(avail: &ScenarioSet, wind: &WindSet, cap: usize) -> Result<ScenarioSet> {
    if avail.is_empty() || wind.scenarios.is_empty() {
        return Err(Error::validation("cannot combine an empty scenario set"));
    }
    let size = avail.len().saturating_mul(wind.scenarios.len());
    if size > cap {
        return Err(Error::Cap { what: "combined scenario set".into(), size, cap });
    }
    let mut scenarios = Vec::with_capacity(size);
    for a in &avail.scenarios {
        for w in &wind.scenarios {
            scenarios.push(Scenario {
                probability: a.probability * w.probability,
                unit_up: a.unit_up.clone(),
                line_up: a.line_up.clone(),
                wind_speed: w.speeds.clone(),
            });
        }
    }
    Ok(ScenarioSet { wind_sites: wind.sites.clone(), scenarios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::*;

    fn toy(fors: &[f64], line_fors: &[f64]) -> SystemModel {
        let nb = line_fors.len() + 1;
        SystemModel {
            buses: (1..=nb).map(|id| Bus { id, peak_load: 10.0 }).collect(),
            lines: line_fors
                .iter()
                .enumerate()
                .map(|(k, &f)| TransmissionLine { from: k, to: k + 1, susceptance: 1.0, capacity: 10.0, for_rate: f })
                .collect(),
            units: fors
                .iter()
                .enumerate()
                .map(|(k, &f)| ConventionalUnit {
                    id: format!("g{k}"),
                    bus: Some(0),
                    capacity: 10.0,
                    marginal_cost: 1.0,
                    for_rate: f,
                    owned: false,
                    candidate_buses: vec![],
                    invest_cost: 0.0,
                })
                .collect(),
            wind_farms: vec![],
            load_blocks: vec![LoadBlock { id: "b".into(), level: 1.0, duration: 1.0 }],
            config: StudyConfig::default(),
        }
    }

    #[test]
    fn no_uncertainty_gives_base_only() {
        let s = enumerate_n_minus_1(&toy(&[0.0, 0.0], &[0.0])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.scenarios[0].probability, 1.0);
    }

    #[test]
    fn single_unit_binomial() {
        let s = enumerate_n_minus_1(&toy(&[0.1], &[])).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.scenarios[0].probability - 0.9).abs() < 1e-15);
        assert!((s.scenarios[1].probability - 0.1).abs() < 1e-15);
    }

    #[test]
    fn certain_failure_is_an_error() {
        assert!(enumerate_n_minus_1(&toy(&[1.0], &[])).is_err());
    }

    #[test]
    fn combine_multiplies_probabilities() {
        let a = enumerate_n_minus_1(&toy(&[0.1], &[])).unwrap();
        let w = WindSet {
            sites: vec![1],
            scenarios: vec![
                WindScenario { speeds: vec![5.0], probability: 0.5 },
                WindScenario { speeds: vec![9.0], probability: 0.5 },
            ],
        };
        let c = combine(&a, &w, 10).unwrap();
        let p: Vec<f64> = c.scenarios.iter().map(|s| s.probability).collect();
        for (a, b) in p.iter().zip([0.45, 0.45, 0.05, 0.05]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(combine(&a, &w, 3), Err(Error::Cap { size: 4, cap: 3, .. })));
    }

    #[test]
    fn multi_outage_counts() {
        let m = toy(&[0.1, 0.2, 0.05], &[0.02]);
        let s = enumerate_outages(&m, 2).unwrap();
        assert_eq!(s.len(), 1 + 4 + 6);
        assert!(s.scenarios.iter().all(|x| x.outages() <= 2));
        assert!((s.total_probability() - 1.0).abs() < 1e-12);
    }
}

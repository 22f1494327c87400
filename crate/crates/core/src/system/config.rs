use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Study-wide parameters, read from a `key = value` TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Planning horizon length.
    pub years: usize,
    /// Yearly demand growth as a fraction; year 1 uses the base peaks.
    pub growth: f64,
    pub discount_rate: f64,
    /// Value of lost load, $/MWh.
    pub voll: f64,
    /// Bus id whose angle is pinned to zero.
    pub slack_bus: usize,
    /// Outage rate applied to lines whose `for` field is blank.
    pub line_for_default: f64,
    pub feas_tol: f64,
    pub duality_tol: f64,
    pub comp_tol: f64,
    /// Relative optimality gap accepted by branch-and-bound.
    pub mip_gap: f64,
    /// Seconds; zero disables the limit.
    pub time_limit: f64,
    pub seed: u64,
    /// Upper bound on the size of any combined scenario set.
    pub max_scenarios: usize,
    /// Upper bound on the number of plans the enumeration oracle visits.
    pub oracle_cap: usize,
    /// Simultaneous outages per availability scenario.
    pub max_outages: usize,
    /// Largest |rho| accepted between decorrelated sites.
    pub decorrelation_threshold: f64,
    pub unit_invest_per_kw: f64,
    pub wind_invest_per_kw: f64,
    pub payback_years: f64,
    /// LMP box used by the linearizations is `[-f*voll, f*voll]`.
    pub lmp_bound_factor: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            years: 1,
            growth: 0.0,
            discount_rate: 0.0,
            voll: 1000.0,
            slack_bus: 1,
            line_for_default: 0.02,
            feas_tol: 1e-7,
            duality_tol: 1e-6,
            comp_tol: 1e-6,
            mip_gap: 0.0,
            time_limit: 0.0,
            seed: 42,
            max_scenarios: 100_000,
            oracle_cap: 100_000,
            max_outages: 1,
            decorrelation_threshold: 0.1,
            unit_invest_per_kw: 400.0,
            wind_invest_per_kw: 1000.0,
            payback_years: 40.0,
            lmp_bound_factor: 2.0,
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(text: &str, file: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { file: file.to_string(), line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("config: {m}")));
        if self.years == 0 {
            return bad("years must be at least 1");
        }
        if !(self.growth > -1.0) || !self.growth.is_finite() {
            return bad("growth must be finite and above -1");
        }
        if !(self.discount_rate >= 0.0) || !self.discount_rate.is_finite() {
            return bad("discount_rate must be nonnegative");
        }
        if !(self.voll > 0.0) || !self.voll.is_finite() {
            return bad("voll must be positive");
        }
        if !(0.0..1.0).contains(&self.line_for_default) {
            return bad("line_for_default must lie in [0, 1)");
        }
        for (name, v) in [
            ("feas_tol", self.feas_tol),
            ("duality_tol", self.duality_tol),
            ("comp_tol", self.comp_tol),
            ("unit_invest_per_kw", self.unit_invest_per_kw),
            ("wind_invest_per_kw", self.wind_invest_per_kw),
            ("payback_years", self.payback_years),
            ("decorrelation_threshold", self.decorrelation_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.mip_gap >= 0.0) || !(self.time_limit >= 0.0) {
            return bad("mip_gap and time_limit must be nonnegative");
        }
        if !(self.lmp_bound_factor >= 1.0) {
            return bad("lmp_bound_factor must be at least 1");
        }
        if self.max_outages == 0 {
            return bad("max_outages must be at least 1");
        }
        Ok(())
    }

    /// `(1 + growth)^(y - 1)` for 1-based year `y`.
    pub fn growth_factor(&self, y: usize) -> f64 {
        (1.0 + self.growth).powi(y as i32 - 1)
    }

    /// `(1 + r)^-y` for 1-based year `y`.
    pub fn discount_factor(&self, y: usize) -> f64 {
        (1.0 + self.discount_rate).powi(-(y as i32))
    }
}

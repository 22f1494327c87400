use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::system::io::Table;
use crate::system::WindFarm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindScenario {
    /// m/s per site, in the owning set's site order.
    pub speeds: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSet {
    /// Bus ids of the measurement sites.
    pub sites: Vec<usize>,
    pub scenarios: Vec<WindScenario>,
}

impl WindSet {
    pub fn site_index(&self, site: usize) -> Option<usize> {
        self.sites.iter().position(|&s| s == site)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.speeds[k]).collect()
    }

    fn equiprobable(sites: Vec<usize>, rows: Vec<Vec<f64>>) -> WindSet {
        let p = 1.0 / rows.len() as f64;
        WindSet { sites, scenarios: rows.into_iter().map(|speeds| WindScenario { speeds, probability: p }).collect() }
    }
}

/// Farm output, MW, at a given wind speed: turbine count times the
/// single-turbine curve.
pub fn wind_power(farm: &WindFarm, wind_speed: f64) -> f64 {
    farm.n_turbines as f64 * farm.power_curve.power(wind_speed)
}

fn pearson(a: &[f64], b: &[f64], w: &[f64]) -> Option<f64> {
    let ma: f64 = a.iter().zip(w).map(|(x, p)| x * p).sum();
    let mb: f64 = b.iter().zip(w).map(|(x, p)| x * p).sum();
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for ((x, y), p) in a.iter().zip(b).zip(w) {
        sab += p * (x - ma) * (y - mb);
        saa += p * (x - ma) * (x - ma);
        sbb += p * (y - mb) * (y - mb);
    }
    let scale = 1e-14 * (1.0 + ma.abs().max(mb.abs())).powi(2);
    if saa <= scale || sbb <= scale {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Probability-weighted Pearson correlation between two sites (bus ids).
pub fn estimate_correlation(set: &WindSet, site_a: usize, site_b: usize) -> Result<f64> {
    if set.scenarios.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two scenarios".into()));
    }
    let ka = set.site_index(site_a).ok_or_else(|| Error::validation(format!("unknown wind site {site_a}")))?;
    let kb = set.site_index(site_b).ok_or_else(|| Error::validation(format!("unknown wind site {site_b}")))?;
    let w: Vec<f64> = set.scenarios.iter().map(|s| s.probability).collect();
    pearson(&set.column(ka), &set.column(kb), &w)
        .ok_or_else(|| Error::UndefinedCorrelation(format!("zero variance at site {site_a} or {site_b}")))
}

const MAX_SHUFFLES: usize = 10_000;

/// Remove cross-site correlation while keeping each site's values.
///
/// Every site's column is shuffled by its own seeded permutation. A site's
/// permutation is redrawn until its |rho| against every earlier site is at
/// most `threshold`; if no draw reaches it, the draw with the smallest
/// worst-case |rho| is kept. Scenario probabilities stay with their rows.
pub fn decorrelate(set: &WindSet, seed: u64, threshold: f64) -> Result<WindSet> {
    if set.scenarios.len() < 2 {
        return Err(Error::validation("decorrelation needs at least two scenarios"));
    }
    if set.sites.len() < 2 {
        return Ok(set.clone());
    }
    let n = set.scenarios.len();
    let w: Vec<f64> = set.scenarios.iter().map(|s| s.probability).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(set.sites.len());
    for k in 0..set.sites.len() {
        let orig = set.column(k);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..MAX_SHUFFLES {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let col: Vec<f64> = perm.iter().map(|&i| orig[i]).collect();
            let worst = cols.iter().filter_map(|c| pearson(c, &col, &w)).fold(0.0f64, |a, r| a.max(r.abs()));
            if best.as_ref().is_none_or(|b| worst < b.0) {
                best = Some((worst, col));
            }
            if worst <= threshold {
                break;
            }
        }
        cols.push(best.expect("at least one shuffle").1);
    }
    let scenarios =
        (0..n).map(|i| WindScenario { speeds: cols.iter().map(|c| c[i]).collect(), probability: w[i] }).collect();
    Ok(WindSet { sites: set.sites.clone(), scenarios })
}

/// Target statistics for synthetic wind: per-site Weibull marginals and a
/// correlation matrix in site order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindTargets {
    pub sites: Vec<usize>,
    pub correlation: Vec<Vec<f64>>,
    pub shape: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Read `wind_sites.csv` (site, weibull_shape, weibull_scale) and
/// `wind_correlation.csv` (site_a, site_b, rho) from `dir`. Unlisted pairs
/// are an error; the matrix is completed symmetrically.
pub fn load_wind_targets(dir: &Path) -> Result<WindTargets> {
    let st = Table::read(&dir.join("wind_sites.csv"))?;
    st.require(&["site", "weibull_shape", "weibull_scale"])?;
    let (mut sites, mut shape, mut scale) = (vec![], vec![], vec![]);
    for row in &st.rows {
        sites.push(st.get::<usize>(row, "site")?);
        shape.push(st.get::<f64>(row, "weibull_shape")?);
        scale.push(st.get::<f64>(row, "weibull_scale")?);
    }
    let n = sites.len();
    let mut corr = vec![vec![f64::NAN; n]; n];
    for (i, row) in corr.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let ct = Table::read(&dir.join("wind_correlation.csv"))?;
    ct.require(&["site_a", "site_b", "rho"])?;
    for row in &ct.rows {
        let find = |col: &str| -> Result<usize> {
            let id: usize = ct.get(row, col)?;
            sites.iter().position(|&s| s == id).ok_or_else(|| ct.err(row.0, format!("unknown site {id}")))
        };
        let (a, b) = (find("site_a")?, find("site_b")?);
        let rho: f64 = ct.get(row, "rho")?;
        corr[a][b] = rho;
        corr[b][a] = rho;
    }
    if corr.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::validation("wind correlation table does not cover every site pair"));
    }
    Ok(WindTargets { sites, correlation: corr, shape, scale })
}

/// Equiprobable wind-speed scenarios from a Gaussian copula with the target
/// correlation matrix and Weibull marginals.
pub fn synthesize_correlated_wind(targets: &WindTargets, n_scenarios: usize, seed: u64) -> Result<WindSet> {
    if n_scenarios < 2 {
        return Err(Error::validation("at least two wind scenarios are needed"));
    }
    let d = targets.sites.len();
    if d == 0 || targets.correlation.len() != d || targets.shape.len() != d || targets.scale.len() != d {
        return Err(Error::validation("wind targets have inconsistent dimensions"));
    }
    if targets.shape.iter().chain(&targets.scale).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::validation("Weibull parameters must be positive"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| targets.correlation[i][j]);
    for i in 0..d {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::validation("correlation matrix needs a unit diagonal"));
        }
        for j in 0..d {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 || m[(i, j)].abs() > 1.0 {
                return Err(Error::validation("correlation matrix must be symmetric with entries in [-1, 1]"));
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 {
        return Err(Error::validation(format!(
            "correlation matrix is not positive semidefinite (eigenvalue {min_eig:.3e})"
        )));
    }
    let sqrt_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let factor = &eig.eigenvectors * sqrt_l;
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_scenarios);
    for _ in 0..n_scenarios {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &factor * z;
        let speeds = (0..d)
            .map(|k| {
                // Keep the uniform away from 1 so the inverse stays finite.
                let u = normal.cdf(x[k]).min(1.0 - 1e-16);
                targets.scale[k] * (-(1.0 - u).ln()).powf(1.0 / targets.shape[k])
            })
            .collect();
        rows.push(speeds);
    }
    Ok(WindSet::equiprobable(targets.sites.clone(), rows))
}

/// Read a wind-speed file: one column per site, one row per equiprobable
/// scenario. Headers are bus ids, optionally suffixed `_mps`.
pub fn read_wind_scenarios(path: &Path) -> Result<WindSet> {
    let t = Table::read(path)?;
    let names = t.column_names();
    let mut sites = Vec::new();
    for h in &names {
        sites.push(
            h.strip_suffix("_mps")
                .unwrap_or(h)
                .parse::<usize>()
                .map_err(|_| t.err(1, format!("site header `{h}` is not a bus id")))?,
        );
    }
    if sites.is_empty() {
        return Err(t.err(1, "no site columns"));
    }
    let mut rows = Vec::new();
    for row in &t.rows {
        let mut v = Vec::with_capacity(names.len());
        for h in &names {
            let s: f64 = t.get(row, h)?;
            if !(s >= 0.0) || !s.is_finite() {
                return Err(t.err(row.0, format!("negative or non-finite wind speed at site {h}")));
            }
            v.push(s);
        }
        rows.push(v);
    }
    if rows.is_empty() {
        return Err(t.err(1, "no scenarios"));
    }
    Ok(WindSet::equiprobable(sites, rows))
}

/// CSV text of `set` in the layout `read_wind_scenarios` accepts.
pub fn wind_scenarios_csv(set: &WindSet) -> String {
    let mut s = set.sites.iter().map(|x| format!("{x}_mps")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for sc in &set.scenarios {
        let line = sc.speeds.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "{line}");
    }
    s
}

pub fn write_wind_scenarios(set: &WindSet, path: &Path) -> Result<()> {
    std::fs::write(path, wind_scenarios_csv(set)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::PowerCurve;

    fn farm(n: u32) -> WindFarm {
        WindFarm {
            id: "w".into(),
            bus: Some(0),
            n_turbines: n,
            power_curve: PowerCurve::new(vec![(0.0, 0.0), (3.0, 0.0), (9.0, 1.5), (15.0, 2.5), (25.0, 2.5)]).unwrap(),
            owned: false,
            candidate_buses: vec![],
            invest_cost: 0.0,
        }
    }

    #[test]
    fn farm_power_scales_turbines() {
        let f = farm(100);
        assert_eq!(wind_power(&f, 15.0), 250.0);
        assert_eq!(wind_power(&f, 0.0), 0.0);
        // Midway between (3, 0) and (9, 1.5).
        assert!((wind_power(&f, 6.0) - 100.0 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn self_correlation_is_one_and_constant_site_is_undefined() {
        let set =
            WindSet::equiprobable(vec![1, 2, 3], vec![vec![1.0, 1.0, 4.0], vec![2.0, 2.0, 4.0], vec![5.0, 5.0, 4.0]]);
        assert!((estimate_correlation(&set, 1, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_correlation(&set, 1, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(estimate_correlation(&set, 1, 3), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn single_site_decorrelation_is_identity() {
        let set = WindSet::equiprobable(vec![4], vec![vec![1.0], vec![3.0], vec![2.0]]);
        assert_eq!(decorrelate(&set, 7, 0.1).unwrap(), set);
        let one = WindSet::equiprobable(vec![4, 5], vec![vec![1.0, 2.0]]);
        assert!(decorrelate(&one, 7, 0.1).is_err());
    }

    #[test]
    fn rejects_non_psd_and_tiny_requests() {
        let t = WindTargets {
            sites: vec![1, 2, 3],
            correlation: vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]],
            shape: vec![2.0; 3],
            scale: vec![8.0; 3],
        };
        assert!(synthesize_correlated_wind(&t, 100, 1).is_err());
        let ok = WindTargets { correlation: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], ..t };
        assert!(synthesize_correlated_wind(&ok, 1, 1).is_err());
        assert_eq!(synthesize_correlated_wind(&ok, 10, 1).unwrap().scenarios.len(), 10);
    }
}

//! Random small planning instances shared by the planner tests and the
//! acceptance harness.
#![allow(dead_code)]

use gep_core::scenario::enumerate_n_minus_1;
use gep_core::system::*;
use gep_core::{combine, CandidateSpace, ScenarioSet, WindScenario, WindSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub model: SystemModel,
    pub scenarios: ScenarioSet,
    pub space: CandidateSpace,
}

fn curve() -> PowerCurve {
    PowerCurve::new(vec![(0.0, 0.0), (3.0, 0.0), (12.0, 2.0), (20.0, 2.0), (25.0, 2.0)]).unwrap()
}

/// At most 5 buses, 8 binary columns, 10 scenarios and 3 blocks.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(2..=5usize);
    let buses: Vec<Bus> = (0..nb)
        .map(|k| Bus {
            id: k + 1,
            peak_load: if rng.random_bool(0.75) { rng.random_range(10.0..80.0f64).round() } else { 0.0 },
        })
        .collect();
    let mut lines = Vec::new();
    for k in 1..nb {
        let from = rng.random_range(0..k);
        lines.push(TransmissionLine {
            from,
            to: k,
            susceptance: rng.random_range(5.0..20.0f64).round(),
            capacity: rng.random_range(15.0..70.0f64).round(),
            for_rate: 0.0,
        });
    }
    if nb >= 3 && rng.random_bool(0.5) {
        lines.push(TransmissionLine { from: 0, to: nb - 1, susceptance: 8.0, capacity: 40.0, for_rate: 0.0 });
    }
    let mut units = Vec::new();
    for k in 0..rng.random_range(1..=3usize) {
        units.push(ConventionalUnit {
            id: format!("g{k}"),
            bus: Some(rng.random_range(0..nb)),
            capacity: rng.random_range(20.0..90.0f64).round(),
            marginal_cost: rng.random_range(5.0..40.0f64).round(),
            for_rate: 0.0,
            owned: rng.random_bool(0.4),
            candidate_buses: vec![],
            invest_cost: 0.0,
        });
    }
    let years = if rng.random_bool(0.25) { 2 } else { 1 };
    let mut budget = 8usize;
    let pick_buses = |rng: &mut ChaCha8Rng, budget: &mut usize| -> Option<Vec<usize>> {
        let max_k = (*budget / years).min(nb).min(3);
        if max_k == 0 {
            return None;
        }
        let k = rng.random_range(1..=max_k);
        let mut all: Vec<usize> = (0..nb).collect();
        for i in 0..k {
            let j = rng.random_range(i..nb);
            all.swap(i, j);
        }
        let mut v = all[..k].to_vec();
        v.sort_unstable();
        *budget -= k * years;
        Some(v)
    };
    let n_cand = rng.random_range(1..=2usize);
    for k in 0..n_cand {
        if let Some(b) = pick_buses(&mut rng, &mut budget) {
            units.push(ConventionalUnit {
                id: format!("c{k}"),
                bus: None,
                capacity: rng.random_range(10.0..60.0f64).round(),
                marginal_cost: rng.random_range(5.0..30.0f64).round(),
                for_rate: 0.0,
                owned: true,
                candidate_buses: b,
                invest_cost: rng.random_range(0.0..300_000.0f64).round(),
            });
        }
    }
    // Outage rates on a few devices so the N-1 set stays at 10 or fewer.
    let mut risky = 0;
    for u in units.iter_mut() {
        if risky < 5 && rng.random_bool(0.4) {
            u.for_rate = rng.random_range(0.01..0.1);
            risky += 1;
        }
    }
    for l in lines.iter_mut() {
        if risky < 5 && rng.random_bool(0.3) {
            l.for_rate = rng.random_range(0.01..0.05);
            risky += 1;
        }
    }
    let mut wind_farms = Vec::new();
    let with_wind = budget >= years && rng.random_bool(0.4);
    if with_wind {
        let b = pick_buses(&mut rng, &mut budget).unwrap();
        wind_farms.push(WindFarm {
            id: "w0".into(),
            bus: None,
            n_turbines: rng.random_range(5..20u32),
            power_curve: curve(),
            owned: true,
            candidate_buses: b,
            invest_cost: rng.random_range(0.0..200_000.0f64).round(),
        });
    }
    let nblk = rng.random_range(1..=3usize);
    let mut load_blocks: Vec<LoadBlock> = (0..nblk)
        .map(|k| LoadBlock { id: format!("b{k}"), level: rng.random_range(0.4..1.0f64), duration: 0.0 })
        .collect();
    load_blocks.sort_by(|a, b| a.level.total_cmp(&b.level));
    for (k, b) in load_blocks.iter_mut().enumerate() {
        b.id = format!("b{k}");
        b.duration = 8760.0 / nblk as f64;
    }
    let mut config = StudyConfig { years, ..StudyConfig::default() };
    if rng.random_bool(0.3) {
        config.discount_rate = 0.05;
        config.growth = 0.02;
    }
    let model = SystemModel { buses, lines, units, wind_farms, load_blocks, config };
    model.validate().unwrap();
    let avail = enumerate_n_minus_1(&model).unwrap();
    let scenarios = if with_wind {
        let sites: Vec<usize> = (1..=nb).collect();
        let nw = (10 / avail.len()).clamp(1, 2);
        let wind = WindSet {
            sites,
            scenarios: (0..nw)
                .map(|_| WindScenario {
                    speeds: (0..nb).map(|_| rng.random_range(0.0..22.0f64).round()).collect(),
                    probability: 1.0 / nw as f64,
                })
                .collect(),
        };
        combine(&avail, &wind, 10).unwrap()
    } else {
        avail
    };
    let space = CandidateSpace::from_model(&model);
    Instance { model, scenarios, space }
}

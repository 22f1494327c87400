//! Fixtures shared by the solver benchmarks.

use std::path::PathBuf;

use gep_core::system::*;
use gep_core::{load_system, ScenarioSet};

pub fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// The bundled 24-bus system with its load blocks merged into `blocks`.
pub fn rts24(blocks: Option<usize>) -> SystemModel {
    let mut m = load_system(&data_dir("rts24")).expect("bundled data loads");
    if let Some(k) = blocks {
        m.load_blocks = coarsen_blocks(&m.load_blocks, k);
    }
    m
}

/// A path of `n` buses with a cheap unit at one end, loads along the way
/// and `candidates` owned 20 MW candidates that may go to any of the last
/// three buses.
pub fn chain(n: usize, candidates: usize) -> (SystemModel, ScenarioSet) {
    let buses =
        (1..=n).map(|id| Bus { id, peak_load: if id == 1 { 0.0 } else { 15.0 + 5.0 * (id % 3) as f64 } }).collect();
    let lines = (0..n - 1)
        .map(|k| TransmissionLine {
            from: k,
            to: k + 1,
            susceptance: 10.0,
            capacity: 60.0 - 5.0 * k as f64,
            for_rate: 0.0,
        })
        .collect();
    let mut units = vec![ConventionalUnit {
        id: "base".into(),
        bus: Some(0),
        capacity: 400.0,
        marginal_cost: 12.0,
        for_rate: 0.0,
        owned: false,
        candidate_buses: vec![],
        invest_cost: 0.0,
    }];
    for c in 0..candidates {
        units.push(ConventionalUnit {
            id: format!("c{c}"),
            bus: None,
            capacity: 20.0,
            marginal_cost: 20.0 + c as f64,
            for_rate: 0.0,
            owned: true,
            candidate_buses: (n.saturating_sub(3)..n).collect(),
            invest_cost: 1.0e5,
        });
    }
    let m = SystemModel {
        buses,
        lines,
        units,
        wind_farms: vec![],
        load_blocks: vec![
            LoadBlock { id: "low".into(), level: 0.6, duration: 5000.0 },
            LoadBlock { id: "high".into(), level: 1.0, duration: 3760.0 },
        ],
        config: StudyConfig::default(),
    };
    m.validate().expect("chain fixture is valid");
    let sc = ScenarioSet::base(&m);
    (m, sc)
}

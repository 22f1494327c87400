use std::path::PathBuf;

use gep_core::scenario::{load_wind_targets, WindTargets};
use gep_core::system::*;
use gep_core::{
    decorrelate, enumerate_n_minus_1, estimate_correlation, synthesize_correlated_wind, wind_power, WindScenario,
    WindSet,
};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn rts_n_minus_1_set() {
    let m = load_system(&data("rts24")).unwrap();
    let s = enumerate_n_minus_1(&m).unwrap();
    assert_eq!(s.len(), 1 + 32 + 4 + 34);
    assert!((s.total_probability() - 1.0).abs() <= 1e-12);
    let base = s.scenarios[0].probability;
    assert!(s.scenarios[1..].iter().all(|x| x.probability < base));
    assert!(s.scenarios.iter().all(|x| x.outages() <= 1));
    assert_eq!(s.scenarios[0].outages(), 0);
}

/// Full joint distribution over four independent devices, conditioned on at
/// most one failure.
#[test]
fn normalization_matches_conditioned_joint_distribution() {
    let fors = [0.1, 0.04, 0.12];
    let line_for = 0.02;
    let m = SystemModel {
        buses: vec![Bus { id: 1, peak_load: 10.0 }, Bus { id: 2, peak_load: 0.0 }],
        lines: vec![TransmissionLine { from: 0, to: 1, susceptance: 1.0, capacity: 5.0, for_rate: line_for }],
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
    };
    let q = [fors[0], fors[1], fors[2], line_for];
    let mut kept = Vec::new();
    for mask in 0u32..16 {
        if mask.count_ones() > 1 {
            continue;
        }
        let p: f64 = (0..4).map(|i| if mask >> i & 1 == 1 { q[i] } else { 1.0 - q[i] }).product();
        kept.push((mask, p));
    }
    let z: f64 = kept.iter().map(|k| k.1).sum();
    let s = enumerate_n_minus_1(&m).unwrap();
    assert_eq!(s.len(), kept.len());
    for sc in &s.scenarios {
        let mut mask = 0u32;
        for (i, up) in sc.unit_up.iter().chain(&sc.line_up).enumerate() {
            if !up {
                mask |= 1 << i;
            }
        }
        let expect = kept.iter().find(|k| k.0 == mask).unwrap().1 / z;
        assert!((sc.probability - expect).abs() < 1e-15, "{mask}: {} vs {expect}", sc.probability);
    }
}

fn table8() -> WindTargets {
    load_wind_targets(&data("rts24-wind")).unwrap()
}

#[test]
fn synthetic_wind_hits_target_correlations() {
    let t = table8();
    let set = synthesize_correlated_wind(&t, 5000, 11).unwrap();
    for i in 0..5 {
        for j in i + 1..5 {
            let r = estimate_correlation(&set, t.sites[i], t.sites[j]).unwrap();
            assert!((r - t.correlation[i][j]).abs() <= 0.05, "{}-{}: {r}", t.sites[i], t.sites[j]);
        }
    }
    let ident = WindTargets {
        correlation: (0..5).map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        ..t.clone()
    };
    let set = synthesize_correlated_wind(&ident, 5000, 12).unwrap();
    for i in 0..5 {
        for j in i + 1..5 {
            assert!(estimate_correlation(&set, t.sites[i], t.sites[j]).unwrap().abs() <= 0.05);
        }
    }
}

#[test]
fn decorrelation_of_table8_set() {
    let t = table8();
    let set = synthesize_correlated_wind(&t, 200, 3).unwrap();
    assert!(estimate_correlation(&set, 5, 8).unwrap() > 0.9);
    let d = decorrelate(&set, 9, 0.1).unwrap();
    assert_eq!(d.scenarios.len(), 200);
    for k in 0..5 {
        let mut a = set.column(k);
        let mut b = d.column(k);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        for j in k + 1..5 {
            assert!(estimate_correlation(&d, t.sites[k], t.sites[j]).unwrap().abs() <= 0.1);
        }
    }
    assert_eq!(d, decorrelate(&set, 9, 0.1).unwrap());
}

proptest! {
    #[test]
    fn decorrelate_preserves_marginals(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..25.0, 3), 2..40),
        seed in any::<u64>(),
    ) {
        let p = 1.0 / rows.len() as f64;
        let set = WindSet {
            sites: vec![1, 2, 3],
            scenarios: rows.into_iter().map(|speeds| WindScenario { speeds, probability: p }).collect(),
        };
        let d = decorrelate(&set, seed, 0.1).unwrap();
        for k in 0..3 {
            let mut a = set.column(k);
            let mut b = d.column(k);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn wind_power_nondecreasing_to_rated(a in 0.0f64..15.0, b in 0.0f64..15.0) {
        let m = load_system(&data("rts24-wind")).unwrap();
        let farm = &m.wind_farms[1];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(wind_power(farm, lo) <= wind_power(farm, hi));
        prop_assert!(wind_power(farm, hi) <= farm.capacity());
    }
}

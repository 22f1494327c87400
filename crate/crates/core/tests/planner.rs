mod common;

use std::path::PathBuf;

use common::random_instance;
use gep_core::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use gep_core::system::*;
use gep_core::*;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn unit(
    id: &str,
    bus: Option<usize>,
    cap: f64,
    cost: f64,
    owned: bool,
    cands: Vec<usize>,
    invest: f64,
) -> ConventionalUnit {
    ConventionalUnit {
        id: id.into(),
        bus,
        capacity: cap,
        marginal_cost: cost,
        for_rate: 0.0,
        owned,
        candidate_buses: cands,
        invest_cost: invest,
    }
}

/// Two buses joined by a 40 MW line, cheap existing unit at bus 1 and the
/// load at bus 2.
fn two_bus(units: Vec<ConventionalUnit>) -> SystemModel {
    SystemModel {
        buses: vec![Bus { id: 1, peak_load: 0.0 }, Bus { id: 2, peak_load: 100.0 }],
        lines: vec![TransmissionLine { from: 0, to: 1, susceptance: 10.0, capacity: 40.0, for_rate: 0.0 }],
        units,
        wind_farms: vec![],
        load_blocks: vec![LoadBlock { id: "b".into(), level: 1.0, duration: 1000.0 }],
        config: StudyConfig::default(),
    }
}

#[test]
fn product_block_is_exact_at_binary_vertices() {
    for chi_v in [0.0, 1.0] {
        for p_v in [-5.0, -1.5, 0.0, 3.0, 7.0] {
            for sense in [Sense::Minimize, Sense::Maximize] {
                let mut lp = LinearProgram::new(sense);
                let chi = lp.add_var(chi_v, chi_v, 0.0);
                let p = lp.add_var(p_v, p_v, 0.0);
                let z = linearize_binary_continuous(&mut lp, chi, p, -5.0, 7.0).unwrap();
                lp.objective[z] = 1.0;
                let sol = solve_lp(&lp).unwrap();
                assert_eq!(sol.status, LpStatus::Optimal);
                assert!((sol.x[z] - chi_v * p_v).abs() < 1e-9, "chi={chi_v} p={p_v}: z={}", sol.x[z]);
            }
        }
    }
    let mut lp = LinearProgram::new(Sense::Minimize);
    let chi = lp.add_var(0.0, 1.0, 0.0);
    let p = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
    assert!(linearize_binary_continuous(&mut lp, chi, p, f64::NEG_INFINITY, 1.0).is_err());
}

#[test]
fn relaxed_product_block_vertices_are_products() {
    // With chi relaxed to [0, 1], every vertex of the block has chi in {0, 1}
    // and z = chi * p; check by optimizing random directions.
    let dirs =
        [(1.0, 1.0, 1.0), (-1.0, 2.0, 0.5), (0.3, -1.0, 1.0), (2.0, 0.1, -1.0), (-1.0, -1.0, -1.0), (0.0, 1.0, -3.0)];
    for (a, b, c) in dirs {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let chi = lp.add_var(0.0, 1.0, a);
        let p = lp.add_var(-5.0, 7.0, b);
        let z = linearize_binary_continuous(&mut lp, chi, p, -5.0, 7.0).unwrap();
        lp.objective[z] = c;
        let sol = solve_lp(&lp).unwrap();
        let (x, pv, zv) = (sol.x[chi], sol.x[p], sol.x[z]);
        assert!(x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9, "chi={x}");
        assert!((zv - x * pv).abs() < 1e-9);
    }
}

#[test]
fn zero_candidates_equals_existing_profit() {
    let m = two_bus(vec![
        unit("g", Some(0), 100.0, 10.0, true, vec![], 0.0),
        unit("h", Some(1), 100.0, 30.0, false, vec![], 0.0),
    ]);
    let sc = ScenarioSet::base(&m);
    let space = CandidateSpace::from_model(&m);
    let milp = build_milp(&m, &sc, &space).unwrap();
    assert!(milp.integers.is_empty());
    let r = milp.solve(&BnbOptions::default()).unwrap();
    // The line binds: g sells 40 MW at its own price 10, h sets 30 at bus 2.
    let grid = clear_grid(&m, &sc, &InvestmentPlan::empty(&m)).unwrap();
    let expect = expected_discounted_profit(&grid, &InvestmentPlan::empty(&m), &m, &sc).unwrap();
    assert!((r.objective - expect).abs() < 1e-6 * (1.0 + expect.abs()));
    let o = enumerate_oracle(&m, &sc, &space).unwrap();
    assert!((o.objective - expect).abs() < 1e-6 * (1.0 + expect.abs()));
}

#[test]
fn one_candidate_adds_one_binary_and_its_blocks() {
    let base = two_bus(vec![
        unit("g", Some(0), 100.0, 10.0, true, vec![], 0.0),
        unit("h", Some(1), 100.0, 30.0, false, vec![], 0.0),
    ]);
    let mut with = base.clone();
    with.units.push(unit("c", None, 50.0, 20.0, true, vec![1], 1000.0));
    let a = build_milp(&base, &ScenarioSet::base(&base), &CandidateSpace::from_model(&base)).unwrap();
    let b = build_milp(&with, &ScenarioSet::base(&with), &CandidateSpace::from_model(&with)).unwrap();
    assert_eq!(b.integers.len(), 1);
    // Upper level: u_hat definition + one-build row. Per cell: capacity
    // link row, one dual row, and three products of four rows each.
    let extra_rows = 2 + 1 + 1 + 3 * 4;
    assert_eq!(b.lp.num_constraints(), a.lp.num_constraints() + extra_rows);
    // u, u_hat, P, phi_max, phi_min and three product columns.
    assert_eq!(b.lp.num_vars(), a.lp.num_vars() + 8);
    assert_eq!(b.products.len(), 3);
}

#[test]
fn rts_candidate_space_has_twelve_binaries() {
    let m = load_system(&data("rts24")).unwrap();
    let space = CandidateSpace::from_model(&m);
    assert_eq!(space.num_binaries(), 12);
    let mut small = m.clone();
    small.load_blocks = coarsen_blocks(&m.load_blocks, 1);
    let milp = build_milp(&small, &ScenarioSet::base(&small), &space).unwrap();
    assert_eq!(milp.integers.len(), 12);
}

#[test]
fn candidate_relieving_congestion_is_built() {
    // Building at bus 2 displaces the $30 unit and earns (30 - 20) * 50 per hour.
    let m = two_bus(vec![
        unit("g", Some(0), 100.0, 10.0, false, vec![], 0.0),
        unit("h", Some(1), 100.0, 30.0, false, vec![], 0.0),
        unit("c", None, 50.0, 20.0, true, vec![0, 1], 100_000.0),
    ]);
    let sc = ScenarioSet::base(&m);
    let space = CandidateSpace::from_model(&m);
    let r = plan_milp(&m, &sc, &space).unwrap();
    assert_eq!(r.plan.units[2], Some(Build { bus: 1, year: 1 }));
    let expect = 10.0 * 50.0 * 1000.0 - 100_000.0;
    assert!((r.objective - expect).abs() < 1e-6 * expect, "{}", r.objective);
    assert!(r.big_m.ok);
    assert!(r.max_linearization_residual < 1e-6);
    let o = enumerate_oracle(&m, &sc, &space).unwrap();
    assert_eq!(o.plan, r.plan);
    assert_eq!(o.nodes, 3);
}

#[test]
fn symmetric_candidates_form_one_class() {
    let m = load_system(&data("rts24")).unwrap();
    let space = CandidateSpace::from_model(&m);
    let base = ScenarioSet::base(&m);
    assert_eq!(symmetry_classes(&m, &base, &space), vec![vec![0, 1, 2, 3]]);
    let full = gep_core::enumerate_n_minus_1(&m).unwrap();
    assert_eq!(symmetry_classes(&m, &full, &space), vec![vec![0, 1, 2, 3]]);
    let mut skew = full.clone();
    let g = space.units[0];
    let s = skew.scenarios.iter().position(|x| !x.unit_up[g]).unwrap();
    skew.scenarios[s].probability *= 1.5;
    assert_eq!(symmetry_classes(&m, &skew, &space).len(), 2);
}

#[test]
fn oracle_cap_is_enforced() {
    let mut m = load_system(&data("rts24")).unwrap();
    m.config.oracle_cap = 10;
    let space = CandidateSpace::from_model(&m);
    let err = enumerate_oracle(&m, &ScenarioSet::base(&m), &space).unwrap_err();
    assert!(matches!(err, Error::Cap { .. }));
}

#[test]
fn literal_xi_rows_match_on_a_connected_network() {
    let inst = random_instance(7);
    let a = build_milp(&inst.model, &inst.scenarios, &inst.space).unwrap().solve(&BnbOptions::default()).unwrap();
    let b = build_milp_with(&inst.model, &inst.scenarios, &inst.space, MilpOptions { literal_xi: true })
        .unwrap()
        .solve(&BnbOptions::default())
        .unwrap();
    // On a connected grid the literal rows force xi = 0, so the optimum is
    // the same whenever the reference dual was zero anyway.
    assert!(b.objective <= a.objective + 1e-6 * (1.0 + a.objective.abs()));
}

#[test]
fn failure_study_with_no_outage_rates_has_zero_delta() {
    let mut m = two_bus(vec![
        unit("g", Some(0), 100.0, 10.0, false, vec![], 0.0),
        unit("h", Some(1), 100.0, 30.0, false, vec![], 0.0),
        unit("c", None, 50.0, 20.0, true, vec![0, 1], 100_000.0),
    ]);
    m.config.line_for_default = 0.0;
    let space = CandidateSpace::from_model(&m);
    for route in [StudyRoute::Oracle, StudyRoute::Milp] {
        let rows = run_failure_study(&m, &space, &[15.0, 25.0], &StudyOptions { route, blocks: None }).unwrap();
        for r in rows {
            assert_eq!(r.plan_nf, r.plan_f);
            assert_eq!(r.delta, Some(0.0));
        }
    }
}

#[test]
fn correlation_study_single_site_has_zero_delta() {
    let m = load_system(&data("rts24-wind")).unwrap();
    let mut m = m.clone();
    m.load_blocks = coarsen_blocks(&m.load_blocks, 2);
    let n8 = m.bus_index(8).unwrap();
    for f in m.wind_farms.iter_mut() {
        if f.is_candidate() {
            f.candidate_buses = vec![n8];
        } else {
            f.bus = Some(n8);
        }
    }
    let space = CandidateSpace::from_model(&m);
    let wind = WindSet {
        sites: vec![8],
        scenarios: [4.0, 9.0, 14.0].iter().map(|&v| WindScenario { speeds: vec![v], probability: 1.0 / 3.0 }).collect(),
    };
    let rows = run_correlation_study(&m, &space, &wind, &[], 5, &StudyOptions::default()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].plan_nc, rows[0].plan_c);
    assert!(rows[0].delta.is_none_or(|d| d == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn milp_matches_oracle(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let milp = build_milp(&inst.model, &inst.scenarios, &inst.space).unwrap();
        let r = milp.solve(&BnbOptions::default()).unwrap();
        let o = enumerate_oracle(&inst.model, &inst.scenarios, &inst.space).unwrap();
        let tol = 1e-6 * (1.0 + o.objective.abs());
        prop_assert!((r.objective - o.objective).abs() <= tol, "milp {} oracle {}", r.objective, o.objective);
        prop_assert_eq!(&r.plan, &o.plan);
        prop_assert!(r.big_m.ok, "{:?}", r.big_m.details);
        prop_assert!(r.max_linearization_residual <= 1e-5);
        prop_assert!(r.max_duality_residual <= 1e-6);
    }

    #[test]
    fn enlarging_bus_sets_never_hurts(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let small = enumerate_oracle(&inst.model, &inst.scenarios, &inst.space).unwrap();
        let mut wide = inst.space.clone();
        let nb = inst.model.buses.len();
        for buses in wide.unit_buses.iter_mut().chain(wide.farm_buses.iter_mut()) {
            if let Some(extra) = (0..nb).find(|n| !buses.contains(n)) {
                buses.push(extra);
                buses.sort_unstable();
            }
        }
        let big = enumerate_oracle(&inst.model, &inst.scenarios, &wide).unwrap();
        prop_assert!(big.objective >= small.objective - 1e-6 * (1.0 + small.objective.abs()));
    }

    #[test]
    fn failure_study_dominance(seed in any::<u64>()) {
        let inst = random_instance(seed);
        prop_assume!(inst.model.wind_farms.is_empty());
        let rows = run_failure_study(&inst.model, &inst.space, &[10.0, 25.0], &StudyOptions::default()).unwrap();
        for r in rows {
            prop_assert!(r.profit_f >= r.profit_nf - 1e-6 * (1.0 + r.profit_nf.abs()));
        }
    }
}

#[test]
fn plan_entries_round_trip() {
    let m = load_system(&data("rts24")).unwrap();
    let space = CandidateSpace::from_model(&m);
    let plan = space.plan_from_options(&m, &[0, 2, 2, 3]);
    let back = InvestmentPlan::from_entries(&m, &plan.entries(&m)).unwrap();
    assert_eq!(plan, back);
    assert_eq!(plan.describe(&m), "n2,n2,n7");
    assert_eq!(space.options_of_plan(&plan), vec![0, 2, 2, 3]);
}

#[test]
fn milp_dual_rows_on_a_fixed_plan_give_lp_duals() {
    // Sanity on sign conventions: with the plan fixed, the LMP column of the
    // congested bus equals the clearing LP's price.
    let m = two_bus(vec![
        unit("g", Some(0), 100.0, 10.0, true, vec![], 0.0),
        unit("h", Some(1), 100.0, 30.0, false, vec![], 0.0),
    ]);
    let sc = ScenarioSet::base(&m);
    let milp = build_milp(&m, &sc, &CandidateSpace::from_model(&m)).unwrap();
    let sol = solve_lp(&milp.lp).unwrap();
    let lam = &milp.blocks[0].lambda;
    assert!((sol.x[lam[1]] - 30.0).abs() < 1e-9);
    assert!((sol.x[lam[0]] - 10.0).abs() < 1e-9);
}

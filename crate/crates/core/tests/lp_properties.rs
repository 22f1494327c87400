use gep_core::lp::{check_kkt, solve_lp, LinearProgram, LpStatus, Relation, Sense};
use proptest::prelude::*;

/// Brute-force optimum of a boxed LP by enumerating every basic solution.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Each candidate hyperplane: (coefficients, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut row = vec![0.0; n];
        for &(j, v) in &c.terms {
            row[j] = v;
        }
        planes.push((row, c.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&idx.iter().map(|&i| planes[i].clone()).collect::<Vec<_>>()) {
            if feasible(lp, &x) {
                let v = lp.evaluate(&x);
                best = Some(match (best, lp.sense) {
                    (None, _) => v,
                    (Some(b), Sense::Minimize) => b.min(v),
                    (Some(b), Sense::Maximize) => b.max(v),
                });
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|(r, b)| {
            let mut v = r.clone();
            v.push(*b);
            v
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    let tol = 1e-7;
    for j in 0..lp.num_vars() {
        if x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol {
            return false;
        }
    }
    lp.constraints.iter().zip(lp.row_activity(x)).all(|(c, act)| match c.relation {
        Relation::Le => act <= c.rhs + tol,
        Relation::Ge => act >= c.rhs - tol,
        Relation::Eq => (act - c.rhs).abs() <= tol,
    })
}

prop_compose! {
    fn boxed_lp(max_vars: usize, max_rows: usize)
        (n in 1..=max_vars, m in 0..=max_rows)
        (sense in any::<bool>(),
         cost in prop::collection::vec(-5i32..=5, n),
         bounds in prop::collection::vec((-6i32..=0, 0i32..=6), n),
         rows in prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, 0i32..=3), m),
         anchor in prop::collection::vec(0.0f64..1.0, n))
        -> LinearProgram
    {
        let mut lp = LinearProgram::new(if sense { Sense::Maximize } else { Sense::Minimize });
        let mut x0 = Vec::new();
        for (j, &(l, u)) in bounds.iter().enumerate() {
            lp.add_var(l as f64, u as f64, cost[j] as f64);
            x0.push(l as f64 + anchor[j] * (u - l) as f64);
        }
        for (coef, rel, slack) in rows {
            let act: f64 = coef.iter().zip(&x0).map(|(a, x)| *a as f64 * x).sum();
            let terms = coef.iter().enumerate().map(|(j, a)| (j, *a as f64));
            match rel {
                0 => lp.add_constraint(terms, Relation::Le, act + slack as f64),
                1 => lp.add_constraint(terms, Relation::Ge, act - slack as f64),
                _ => lp.add_constraint(terms, Relation::Eq, act),
            };
        }
        lp
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn strong_duality_and_kkt_on_feasible_boxed_lps(lp in boxed_lp(8, 8)) {
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let gap = (sol.objective - sol.dual_objective).abs();
        prop_assert!(gap <= 1e-6 * (1.0 + sol.objective.abs()), "gap {}", gap);
        let report = check_kkt(&lp, &sol);
        prop_assert!(report.within(1e-7), "{:?}", report);
    }

    #[test]
    fn matches_vertex_enumeration(lp in boxed_lp(3, 4)) {
        let sol = solve_lp(&lp).unwrap();
        let brute = vertex_enumeration(&lp).expect("anchor point makes the LP feasible");
        prop_assert!((sol.objective - brute).abs() <= 1e-7 * (1.0 + brute.abs()),
            "simplex {} vs enumeration {}", sol.objective, brute);
    }

    #[test]
    fn objective_scaling_scales_value_and_duals(lp in boxed_lp(6, 6), factor in 0.1f64..50.0) {
        let base = solve_lp(&lp).unwrap();
        let mut scaled = lp.clone();
        scaled.objective.iter_mut().for_each(|c| *c *= factor);
        let s = solve_lp(&scaled).unwrap();
        prop_assert!((s.objective - factor * base.objective).abs() <= 1e-7 * (1.0 + s.objective.abs()));
        prop_assert!((s.dual_objective - factor * base.dual_objective).abs() <= 1e-6 * (1.0 + s.objective.abs()));
    }

    #[test]
    fn redundant_row_does_not_move_optimum(lp in boxed_lp(6, 6), pick in any::<prop::sample::Index>()) {
        let base = solve_lp(&lp).unwrap();
        let mut more = lp.clone();
        if !lp.constraints.is_empty() {
            let c = lp.constraints[pick.index(lp.constraints.len())].clone();
            // A looser copy of an existing row.
            let rhs = match c.relation { Relation::Le => c.rhs + 1.0, Relation::Ge => c.rhs - 1.0, Relation::Eq => c.rhs };
            more.add_constraint(c.terms.clone(), c.relation, rhs);
        }
        let s = solve_lp(&more).unwrap();
        prop_assert!((s.objective - base.objective).abs() <= 1e-6 * (1.0 + base.objective.abs()));
    }
}

#[test]
fn two_simplex_example_matches_vertices() {
    // min -x - y  s.t.  x + y <= 1,  x, y in [0, 1]
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var(0.0, 1.0, -1.0);
    let y = lp.add_var(0.0, 1.0, -1.0);
    lp.add_constraint([(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
    let sol = solve_lp(&lp).unwrap();
    // Vertices: (0,0) -> 0, (1,0) -> -1, (0,1) -> -1.
    assert_eq!(vertex_enumeration(&lp), Some(-1.0));
    assert!((sol.objective + 1.0).abs() < 1e-12);
    assert!((sol.dual_objective + 1.0).abs() < 1e-9);
    assert!(sol.row_duals[0] <= 0.0);
    assert!(check_kkt(&lp, &sol).within(1e-9));
}

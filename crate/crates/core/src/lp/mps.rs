//! Fixed-format MPS export for cross-checking with external solvers.

use std::fmt::Write as _;

use super::{LinearProgram, Relation, Sense};

fn num(v: f64) -> String {
    // Fixed MPS allows 12 characters per numeric field.
    let s = format!("{v}");
    if s.len() <= 12 {
        return s;
    }
    let mut p = 6;
    loop {
        let e = format!("{v:.p$E}");
        if e.len() <= 12 || p == 0 {
            return e;
        }
        p -= 1;
    }
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) {
    // Columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if !f5.is_empty() {
        let _ = write!(s, "   {f5:<8}  {f6:>12}");
    }
    out.push_str(s.trim_end());
    out.push('\n');
}

/// Render `lp` as fixed-format MPS. Rows are named `R0000001..`, columns
/// `C0000001..`; a maximization is announced with an `OBJSENSE` section.
pub fn to_mps(lp: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", &name[..name.len().min(8)]);
    if lp.sense == Sense::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n N  COST\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let t = match c.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {t}  R{:07}", i + 1);
    }
    let n = lp.num_vars();
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, v) in &c.terms {
            by_col[j].push((i, v));
        }
    }
    out.push_str("COLUMNS\n");
    for j in 0..n {
        let cname = format!("C{:07}", j + 1);
        let mut entries: Vec<(String, f64)> = Vec::new();
        if lp.objective[j] != 0.0 {
            entries.push(("COST".into(), lp.objective[j]));
        }
        entries.extend(by_col[j].iter().map(|&(i, v)| (format!("R{:07}", i + 1), v)));
        if entries.is_empty() {
            // Keep the column declared.
            entries.push(("COST".into(), 0.0));
        }
        for pair in entries.chunks(2) {
            let (r1, v1) = (&pair[0].0, num(pair[0].1));
            match pair.get(1) {
                Some((r2, v2)) => line(&mut out, "", &cname, r1, &v1, r2, &num(*v2)),
                None => line(&mut out, "", &cname, r1, &v1, "", ""),
            }
        }
    }
    out.push_str("RHS\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.rhs != 0.0 {
            line(&mut out, "", "RHS", &format!("R{:07}", i + 1), &num(c.rhs), "", "");
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..n {
        let cname = format!("C{:07}", j + 1);
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l == u {
            line(&mut out, "FX", "BND", &cname, &num(l), "", "");
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => line(&mut out, "FR", "BND", &cname, "", "", ""),
            (false, true) => {
                line(&mut out, "MI", "BND", &cname, "", "", "");
                line(&mut out, "UP", "BND", &cname, &num(u), "", "");
            }
            (true, fin_u) => {
                if l != 0.0 {
                    line(&mut out, "LO", "BND", &cname, &num(l), "", "");
                }
                if fin_u {
                    line(&mut out, "UP", "BND", &cname, &num(u), "", "");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_land_in_fixed_columns() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 5.0, 2.5);
        let y = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint([(x, 1.0), (y, -1.0)], Relation::Eq, 3.0);
        let text = to_mps(&lp, "toy");
        let col_line = text.lines().find(|l| l.starts_with("    C0000001")).unwrap();
        assert_eq!(&col_line[4..12], "C0000001");
        assert_eq!(&col_line[14..18], "COST");
        assert_eq!(col_line[24..36].trim(), "2.5");
        assert_eq!(&col_line[39..47], "R0000001");
        assert!(text.contains(" FR BND       C0000002"));
        assert!(text.contains(" UP BND       C0000001"));
        assert!(text.ends_with("ENDATA\n"));
    }
}

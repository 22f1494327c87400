use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gep")).args(args).output().expect("gep runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn repo_data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two buses, a cheap rival unit at bus 1 and one 30 MW candidate that
/// may go to either bus.
fn toy(dir: &Path) {
    std::fs::write(dir.join("buses.csv"), "id,peak_load\n1,40\n2,60\n").unwrap();
    std::fs::write(dir.join("lines.csv"), "from,to,susceptance,capacity,for\n1,2,10,30,0\n").unwrap();
    std::fs::write(
        dir.join("units.csv"),
        "id,bus,capacity,cost,for,owned,candidate_buses\ng1,1,120,10,0.05,0,\nc1,,30,15,0,1,1;2\n",
    )
    .unwrap();
    std::fs::write(dir.join("blocks.csv"), "id,level,duration_h\nbase,0.6,5760\npeak,1.0,3000\n").unwrap();
}

#[test]
fn plan_both_modes_agree_on_a_toy() {
    let data = TempDir::new().unwrap();
    toy(data.path());
    let out = TempDir::new().unwrap();
    let o = gep(&["--data", s(data.path()), "--out", s(out.path()), "plan", "--mode", "both", "--outages", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.path().join("plan_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "milp");
    assert_eq!(rows[1][0], "oracle");
    assert_eq!(rows[0][1], rows[1][1]);
    assert_eq!(rows[0][9], rows[1][9]);
    // The candidate earns the congestion rent at bus 2.
    let plan = std::fs::read_to_string(out.path().join("plan.jsonl")).unwrap();
    assert_eq!(plan.trim(), r#"{"asset":"c1","bus":2,"year":1}"#);
    assert!(out.path().join("manifest.json").exists());
    assert!(out.path().join("plan.txt").exists());
}

#[test]
fn clear_reads_the_plan_written_by_plan() {
    let data = TempDir::new().unwrap();
    toy(data.path());
    let out = TempDir::new().unwrap();
    let o = gep(&["--data", s(data.path()), "--out", s(out.path()), "plan", "--mode", "oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = out.path().join("plan.jsonl");
    let out2 = TempDir::new().unwrap();
    let lp = out2.path().join("lp");
    let o = gep(&[
        "--data",
        s(data.path()),
        "--out",
        s(out2.path()),
        "--dump-lp",
        s(&lp),
        "clear",
        "--plan",
        s(&plan),
        "--outages",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out2.path().join("results.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "s,b,y,bus,probability,load_mw,lmp_usd_per_mwh,shed_mw,g1_mw,c1_mw");
    // Base plus the g1 outage; the line and c1 never fail. Two blocks, two buses.
    let scenarios = 2;
    assert_eq!(csv.lines().count(), 1 + scenarios * 2 * 2);
    // The candidate produces only at the bus it was built at.
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[3] == "1" {
            assert_eq!(f[9], "0.000000");
        }
    }
    let mps: Vec<_> = std::fs::read_dir(&lp).unwrap().collect();
    assert_eq!(mps.len(), scenarios * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.path().join("manifest.json")).unwrap()).unwrap();
    let inputs = manifest["inputs"].as_array().unwrap();
    assert!(inputs.iter().any(|i| i["path"].as_str().unwrap().ends_with("plan.jsonl")));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 1 + scenarios * 2);
}

#[test]
fn study_failures_table_shape() {
    let out = TempDir::new().unwrap();
    let o = gep(&[
        "--data",
        &repo_data("rts24"),
        "--out",
        s(out.path()),
        "study-failures",
        "--costs",
        "15..24",
        "--blocks",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.path().join("study_failures.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cost_usd_per_mwh,b_nf,profit_nf_musd,b_f,profit_f_musd,delta_pct");
    assert_eq!(lines.len(), 11);
    for (k, l) in lines[1..].iter().enumerate() {
        assert!(l.starts_with(&format!("{},", 15 + k)), "{l}");
    }
}

#[test]
fn missing_blocks_file_exits_3_without_outputs() {
    let data = TempDir::new().unwrap();
    toy(data.path());
    std::fs::remove_file(data.path().join("blocks.csv")).unwrap();
    let out = TempDir::new().unwrap();
    let target = out.path().join("run");
    let o = gep(&["--data", s(data.path()), "--out", s(&target), "plan"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocks.csv"));
    assert!(!target.exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&gep(&["plan", "--no-such-flag"])), 2);
    assert_eq!(code(&gep(&["study-failures", "--costs", "24..15"])), 2);
    assert_eq!(code(&gep(&[])), 2);
}

#[test]
fn bad_inputs_exit_4() {
    let data = TempDir::new().unwrap();
    toy(data.path());
    std::fs::write(data.path().join("config.toml"), "voll = \"high\"\n").unwrap();
    let o = gep(&["--data", s(data.path()), "validate"]);
    assert_eq!(code(&o), 4);
    std::fs::write(data.path().join("config.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(code(&gep(&["--data", s(data.path()), "validate"])), 4);
    std::fs::remove_file(data.path().join("config.toml")).unwrap();
    std::fs::write(data.path().join("lines.csv"), "from,to,susceptance,capacity\n1,9,10,30\n").unwrap();
    let o = gep(&["--data", s(data.path()), "validate"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lines.csv"));
}

#[test]
fn scenario_cap_exits_5_without_outputs() {
    let out = TempDir::new().unwrap();
    let target = out.path().join("run");
    let o = gep(&["--data", &repo_data("rts24-wind"), "--out", s(&target), "scenarios", "--max-scenarios", "100"]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!target.exists());
}

#[test]
fn infeasible_plan_request_exits_4() {
    let data = TempDir::new().unwrap();
    toy(data.path());
    let plan = data.path().join("plan.jsonl");
    std::fs::write(&plan, "{\"asset\":\"c1\",\"bus\":7,\"year\":1}\n").unwrap();
    assert_eq!(code(&gep(&["--data", s(data.path()), "clear", "--plan", s(&plan)])), 4);
    std::fs::write(&plan, "not json\n").unwrap();
    assert_eq!(code(&gep(&["--data", s(data.path()), "clear", "--plan", s(&plan)])), 4);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let run = |seed: &str| {
        let out = TempDir::new().unwrap();
        let o = gep(&[
            "--data",
            &repo_data("rts24-wind"),
            "--out",
            s(out.path()),
            "--seed",
            seed,
            "scenarios",
            "--scenarios",
            "50",
            "--decorrelate",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let wind = std::fs::read(out.path().join("wind_scenarios.csv")).unwrap();
        let avail = std::fs::read(out.path().join("availability.csv")).unwrap();
        (wind, avail)
    };
    let a = run("7");
    let b = run("7");
    let c = run("8");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    assert_eq!(a.1, c.1);
    let header = String::from_utf8(a.0).unwrap();
    assert!(header.starts_with("1_mps,2_mps,5_mps,7_mps,8_mps\n"));
}

#[test]
fn validate_summarizes_the_bundled_system() {
    let o = gep(&["--data", &repo_data("rts24"), "validate"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("32 existing, 4 candidate"));
    assert!(text.contains("71 scenarios"));
}

#[test]
fn study_correlation_table_shape() {
    let out = TempDir::new().unwrap();
    let o = gep(&[
        "--data",
        &repo_data("rts24-wind"),
        "--out",
        s(out.path()),
        "study-correlation",
        "--turbines",
        "100,130",
        "--scenarios",
        "12",
        "--blocks",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.path().join("study_correlation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n_turbines,invest_cost_musd_per_yr,b_nc,profit_nc_musd,b_c,profit_c_musd,delta_pct");
    assert_eq!(lines.len(), 3);
    // Two farms of 100 turbines at 2.5 MW, $1000/kW over 40 years.
    assert!(lines[1].starts_with("100,12.500000,"), "{}", lines[1]);
    assert!(lines[2].starts_with("130,16.250000,"), "{}", lines[2]);
}

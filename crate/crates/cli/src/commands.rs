use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gep_core::clearing::build_clearing_lp;
use gep_core::lp::mps::to_mps;
use gep_core::scenario::{load_wind_targets, read_wind_scenarios, wind_scenarios_csv};
use gep_core::{
    build_milp, clear_grid, coarsen_blocks, combine, decorrelate, enumerate_oracle, enumerate_outages,
    estimate_correlation, expected_discounted_profit, load_system_with, run_correlation_study, run_failure_study,
    synthesize_correlated_wind, BnbOptions, CandidateSpace, ClearingProblem, Error, InvestmentPlan, PlanEntry,
    PlannerResult, ScenarioSet, StudyConfig, StudyOptions, StudyRoute, SystemModel, WindSet,
};

use crate::args::{Cli, Command, Mode, Route, ScenarioSelect, WindArgs};
use crate::output::{finish, fx, input_digests, Outputs, Phases};

struct Run {
    data: PathBuf,
    out: PathBuf,
    dump_lp: Option<PathBuf>,
    threads: Option<usize>,
    model: SystemModel,
    /// Inputs read beyond the data directory.
    extra_inputs: Vec<PathBuf>,
    outputs: Outputs,
    phases: Phases,
}

impl Run {
    fn seed(&self) -> u64 {
        self.model.config.seed
    }

    fn put(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.outputs.add(self.out.join(name), contents);
    }

    fn dump(&mut self, name: &str, lp: &gep_core::lp::LinearProgram) {
        if let Some(dir) = &self.dump_lp {
            self.outputs.add(dir.join(format!("{name}.mps")), to_mps(lp, name));
        }
    }

    fn finish(self) -> Result<()> {
        let extra: Vec<&Path> = self.extra_inputs.iter().map(PathBuf::as_path).collect();
        let inputs = input_digests(&self.data, &extra)?;
        let seed = self.seed();
        finish(self.outputs, &self.out, seed, self.threads, &self.model.config, inputs, self.phases)
    }
}

fn load_config(cli: &Cli) -> Result<(StudyConfig, Option<PathBuf>)> {
    let path = match &cli.config {
        Some(p) => Some(p.clone()),
        None => Some(cli.data.join("config.toml")).filter(|p| p.exists()),
    };
    let mut cfg = match &path {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Plan(a) => {
            if let Some(g) = a.gap {
                cfg.mip_gap = g;
            }
            if let Some(t) = a.time_limit {
                cfg.time_limit = t;
            }
            override_cap(&mut cfg, &a.select.wind);
        }
        Command::Scenarios(a) => override_cap(&mut cfg, &a.wind),
        Command::Clear(a) => override_cap(&mut cfg, &a.select.wind),
        Command::StudyCorrelation(a) => override_cap(&mut cfg, &a.wind),
        Command::Validate | Command::StudyFailures(_) => {}
    }
    cfg.validate()?;
    // A config given on the command line lives outside the data directory.
    Ok((cfg, cli.config.clone()))
}

fn override_cap(cfg: &mut StudyConfig, wind: &WindArgs) {
    if let Some(cap) = wind.max_scenarios {
        cfg.max_scenarios = cap;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(Error::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    let mut phases = Phases::default();
    let (cfg, cfg_path) = phases.time("config", || load_config(&cli))?;
    let model = phases.time("load", || load_system_with(&cli.data, cfg))?;
    let mut run = Run {
        data: cli.data.clone(),
        out: cli.out.clone(),
        dump_lp: cli.dump_lp.clone(),
        threads: cli.threads,
        model,
        extra_inputs: cfg_path.into_iter().collect(),
        outputs: Outputs::default(),
        phases,
    };
    match &cli.command {
        Command::Validate => return validate(&run),
        Command::Scenarios(a) => scenarios(&mut run, a)?,
        Command::Clear(a) => clear(&mut run, a)?,
        Command::Plan(a) => plan(&mut run, a)?,
        Command::StudyFailures(a) => study_failures(&mut run, a)?,
        Command::StudyCorrelation(a) => study_correlation(&mut run, a)?,
    }
    run.finish()
}

fn validate(run: &Run) -> Result<()> {
    let m = &run.model;
    let sc = enumerate_outages(m, m.config.max_outages)?;
    let space = CandidateSpace::from_model(m);
    let peak: f64 = m.buses.iter().map(|b| b.peak_load).sum();
    let cap: f64 = m.existing_units().map(|(_, u)| u.capacity).sum();
    println!("data set        {}", run.data.display());
    println!("buses           {}", m.buses.len());
    println!("lines           {}", m.lines.len());
    println!("units           {} existing, {} candidate", m.existing_units().count(), m.candidate_units().count());
    println!("wind farms      {} existing, {} candidate", m.existing_farms().count(), m.candidate_farms().count());
    println!("load blocks     {} covering {} h", m.load_blocks.len(), m.total_hours());
    println!("years           {}", m.config.years);
    println!("peak load       {} MW", fx(peak, 1));
    println!("unit capacity   {} MW", fx(cap, 1));
    println!("outage sets     {} scenarios with up to {} outage(s)", sc.len(), m.config.max_outages);
    println!("candidate plans {}", space.num_plans());
    println!("ok");
    Ok(())
}

/// The wind set for a run: the given file, else a synthetic set when the
/// data set describes wind sites, else none.
fn wind_set(run: &mut Run, wind: &WindArgs, required: bool) -> Result<Option<WindSet>> {
    if let Some(p) = &wind.wind {
        run.extra_inputs.push(p.clone());
        return Ok(Some(run.phases.time("wind", || read_wind_scenarios(p))?));
    }
    let has_targets = run.data.join("wind_sites.csv").exists();
    if !(required || !run.model.wind_farms.is_empty() || has_targets) {
        return Ok(None);
    }
    let data = run.data.clone();
    let seed = run.seed();
    let set = run.phases.time("wind", || -> gep_core::Result<WindSet> {
        let targets = load_wind_targets(&data)?;
        synthesize_correlated_wind(&targets, wind.n_wind, seed)
    })?;
    Ok(Some(set))
}

fn availability(model: &SystemModel, outages: usize) -> gep_core::Result<ScenarioSet> {
    if outages == 0 {
        Ok(ScenarioSet::base(model))
    } else {
        enumerate_outages(model, outages)
    }
}

fn with_wind(model: &SystemModel, avail: ScenarioSet, wind: Option<&WindSet>) -> gep_core::Result<ScenarioSet> {
    match wind {
        Some(w) if !model.wind_farms.is_empty() => combine(&avail, w, model.config.max_scenarios),
        _ => Ok(avail),
    }
}

fn select_scenarios(run: &mut Run, sel: &ScenarioSelect) -> Result<ScenarioSet> {
    if let Some(k) = sel.blocks {
        if k == 0 {
            bail!(Error::validation("--blocks must be at least 1"));
        }
        run.model.load_blocks = coarsen_blocks(&run.model.load_blocks, k);
    }
    let wind = if run.model.wind_farms.is_empty() && sel.wind.wind.is_none() {
        None
    } else {
        wind_set(run, &sel.wind, false)?
    };
    let m = &run.model;
    Ok(run.phases.time("scenarios", || with_wind(m, availability(m, sel.outages)?, wind.as_ref()))?)
}

fn device_names(m: &SystemModel) -> (Vec<String>, Vec<String>) {
    let units = m.units.iter().map(|u| u.id.clone()).collect();
    let lines = m
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| format!("line{}:{}-{}", k + 1, m.buses[l.from].id, m.buses[l.to].id))
        .collect();
    (units, lines)
}

fn scenarios(run: &mut Run, a: &crate::args::ScenarioArgs) -> Result<()> {
    let k = a.outages.unwrap_or(run.model.config.max_outages);
    let avail = run.phases.time("availability", || enumerate_outages(&run.model, k))?;
    let wind = wind_set(run, &a.wind, false)?;
    let wind = match wind {
        Some(w) if a.decorrelate => {
            let seed = run.seed();
            let thr = run.model.config.decorrelation_threshold;
            Some(run.phases.time("decorrelate", || decorrelate(&w, seed, thr))?)
        }
        w => w,
    };
    if let Some(w) = &wind {
        // Fails with a cap error before anything is written.
        combine(&avail, w, run.model.config.max_scenarios)?;
    } else if a.decorrelate {
        bail!(Error::validation("--decorrelate needs wind data"));
    }

    let (units, lines) = device_names(&run.model);
    let mut csv = String::from("scenario,probability,outages\n");
    for (s, sc) in avail.scenarios.iter().enumerate() {
        let down: Vec<&str> = (sc.unit_up.iter().zip(&units))
            .chain(sc.line_up.iter().zip(&lines))
            .filter(|(up, _)| !**up)
            .map(|(_, n)| n.as_str())
            .collect();
        let down = if down.is_empty() { "-".to_string() } else { down.join(";") };
        let _ = writeln!(csv, "{s},{:e},{down}", sc.probability);
    }
    run.put("availability.csv", csv);
    println!("availability scenarios {} (up to {k} outage(s))", avail.len());
    if let Some(w) = wind {
        let mut worst = 0.0f64;
        for (i, &a) in w.sites.iter().enumerate() {
            for &b in &w.sites[i + 1..] {
                worst = worst.max(estimate_correlation(&w, a, b)?.abs());
            }
        }
        println!("wind scenarios         {} at sites {:?}, largest |rho| {}", w.scenarios.len(), w.sites, fx(worst, 4));
        run.put("wind_scenarios.csv", wind_scenarios_csv(&w));
    }
    Ok(())
}

fn read_plan(model: &SystemModel, path: &Path) -> Result<InvestmentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: PlanEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(e);
    }
    let plan = InvestmentPlan::from_entries(model, &entries)?;
    CandidateSpace::from_model(model).contains(model, &plan)?;
    Ok(plan)
}

fn plan_jsonl(model: &SystemModel, plan: &InvestmentPlan) -> String {
    let mut s = String::new();
    for e in plan.entries(model) {
        s.push_str(&serde_json::to_string(&e).expect("plan entries serialize"));
        s.push('\n');
    }
    s
}

fn clear(run: &mut Run, a: &crate::args::ClearArgs) -> Result<()> {
    let sc = select_scenarios(run, &a.select)?;
    let plan = match &a.plan {
        Some(p) => {
            run.extra_inputs.push(p.clone());
            read_plan(&run.model, p)?
        }
        None => InvestmentPlan::empty(&run.model),
    };
    let m = &run.model;
    let grid = run.phases.time("clear", || clear_grid(m, &sc, &plan))?;
    let profit = expected_discounted_profit(&grid, &plan, m, &sc)?;

    let mut csv = String::from("s,b,y,bus,probability,load_mw,lmp_usd_per_mwh,shed_mw");
    for u in &m.units {
        let _ = write!(csv, ",{}_mw", u.id);
    }
    for f in &m.wind_farms {
        let _ = write!(csv, ",{}_mw", f.id);
    }
    csv.push('\n');
    let mut shed_cells = 0usize;
    for s in 0..sc.len() {
        for b in 0..m.load_blocks.len() {
            for y in 1..=m.num_years() {
                let r = grid.get(s, b, y).context("clearing grid is incomplete")?;
                if r.shed.iter().sum::<f64>() > m.config.feas_tol {
                    shed_cells += 1;
                }
                for (n, bus) in m.buses.iter().enumerate() {
                    let _ = write!(
                        csv,
                        "{s},{b},{y},{},{:e},{},{},{}",
                        bus.id,
                        sc.scenarios[s].probability,
                        fx(m.block_load(n, b, y), 6),
                        fx(r.lmp[n], 6),
                        fx(r.shed[n], 6)
                    );
                    for (g, &p) in r.dispatch.iter().enumerate() {
                        let v = if r.unit_bus[g] == Some(n) { p } else { 0.0 };
                        let _ = write!(csv, ",{}", fx(v, 6));
                    }
                    for (w, &p) in r.wind.iter().enumerate() {
                        let v = if r.farm_bus[w] == Some(n) { p } else { 0.0 };
                        let _ = write!(csv, ",{}", fx(v, 6));
                    }
                    csv.push('\n');
                }
            }
        }
    }
    run.put("results.csv", csv);
    if run.dump_lp.is_some() {
        for s in 0..sc.len() {
            for b in 0..run.model.load_blocks.len() {
                for y in 1..=run.model.num_years() {
                    let p = ClearingProblem { model: &run.model, scenarios: &sc, s, b, y, plan: &plan };
                    let lp = build_clearing_lp(&p).lp;
                    run.dump(&format!("clear_s{s}_b{b}_y{y}"), &lp);
                }
            }
        }
    }
    println!("cells cleared     {}", sc.len() * run.model.load_blocks.len() * run.model.num_years());
    println!("cells with shed   {shed_cells}");
    println!("expected profit   {} $M", fx(profit / 1e6, 6));
    Ok(())
}

fn summary_row(model: &SystemModel, r: &PlannerResult) -> String {
    format!(
        "{},{},{},{:e},{},{:e},{:e},{},{},{}\n",
        r.method,
        fx(r.objective / 1e6, 6),
        fx(r.bound / 1e6, 6),
        r.gap,
        r.nodes,
        r.max_duality_residual,
        r.max_linearization_residual,
        r.big_m.ok,
        r.timed_out,
        csv_field(&r.plan.describe(model))
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn plan_table(model: &SystemModel, results: &[&PlannerResult]) -> String {
    let mut t = String::new();
    let _ =
        writeln!(t, "{:<8} {:>16} {:>16} {:>10} {:>8}  plan", "method", "profit_musd", "bound_musd", "gap", "nodes");
    for r in results {
        let _ = writeln!(
            t,
            "{:<8} {:>16} {:>16} {:>10.2e} {:>8}  {}",
            r.method,
            fx(r.objective / 1e6, 6),
            fx(r.bound / 1e6, 6),
            r.gap,
            r.nodes,
            r.plan.describe(model)
        );
    }
    let main = results[0];
    let entries = main.plan.entries(model);
    if !entries.is_empty() {
        let _ = writeln!(t, "\n{:<12} {:>6} {:>6}", "asset", "bus", "year");
        for e in entries {
            let _ = writeln!(t, "{:<12} {:>6} {:>6}", e.asset, format!("n{}", e.bus), e.year);
        }
    }
    if main.timed_out {
        let _ = writeln!(t, "\nstopped at the time limit; the plan is the best found, not proven optimal");
    }
    t
}

fn plan(run: &mut Run, a: &crate::args::PlanArgs) -> Result<()> {
    let sc = select_scenarios(run, &a.select)?;
    let space = match &a.candidates {
        Some(p) => {
            run.extra_inputs.push(p.clone());
            CandidateSpace::load_overrides(&run.model, p)?
        }
        None => CandidateSpace::from_model(&run.model),
    };
    let m = run.model.clone();
    let mut results = Vec::new();
    if a.mode != Mode::Oracle {
        let milp = run.phases.time("build_milp", || build_milp(&m, &sc, &space))?;
        run.dump("milp", &milp.lp);
        let opts = BnbOptions::from_config(&m.config);
        results.push(run.phases.time("milp", || milp.solve(&opts))?);
    }
    if a.mode != Mode::Milp {
        results.push(run.phases.time("oracle", || enumerate_oracle(&m, &sc, &space))?);
    }
    if let [x, y] = &results[..] {
        let exact = m.config.mip_gap == 0.0 && !x.timed_out;
        let tol = 1e-6 * (1.0 + y.objective.abs());
        if exact && (space.cmp_plans(&x.plan, &y.plan) != Ordering::Equal || (x.objective - y.objective).abs() > tol) {
            bail!(Error::Solver(format!(
                "MILP plan {} ({} $) disagrees with the oracle plan {} ({} $)",
                x.plan.describe(&m),
                x.objective,
                y.plan.describe(&m),
                y.objective
            )));
        }
    }
    let main = &results[0];
    run.put("plan.jsonl", plan_jsonl(&m, &main.plan));
    let mut summary = String::from(
        "method,profit_musd,bound_musd,gap,nodes,max_duality_residual,max_linearization_residual,big_m_ok,timed_out,plan\n",
    );
    for r in &results {
        summary.push_str(&summary_row(&m, r));
    }
    run.put("plan_summary.csv", summary);
    let mut trace = String::from("s,b,y,profit_usd_per_h,weight_h,contribution_usd\n");
    for c in &main.profit_trace {
        let _ = writeln!(
            trace,
            "{},{},{},{},{},{}",
            c.s,
            c.b,
            c.y,
            fx(c.profit, 6),
            fx(c.weight, 6),
            fx(c.weight * c.profit, 6)
        );
    }
    run.put("profit_trace.csv", trace);
    let refs: Vec<&PlannerResult> = results.iter().collect();
    let table = plan_table(&m, &refs);
    print!("{table}");
    run.put("plan.txt", table);
    Ok(())
}

fn study_space(run: &mut Run, candidates: &Option<PathBuf>) -> Result<CandidateSpace> {
    Ok(match candidates {
        Some(p) => {
            run.extra_inputs.push(p.clone());
            CandidateSpace::load_overrides(&run.model, p)?
        }
        None => CandidateSpace::from_model(&run.model),
    })
}

fn route(r: Route) -> StudyRoute {
    match r {
        Route::Oracle => StudyRoute::Oracle,
        Route::Milp => StudyRoute::Milp,
    }
}

/// One column per year when the horizon has more than one.
fn plan_columns(model: &SystemModel, plan: &InvestmentPlan) -> Vec<String> {
    (1..=model.config.years).map(|y| csv_field(&plan.describe_year(model, y))).collect()
}

fn plan_headers(model: &SystemModel, base: &str) -> String {
    if model.config.years == 1 {
        base.to_string()
    } else {
        (1..=model.config.years).map(|y| format!("{base}_y{y}")).collect::<Vec<_>>().join(",")
    }
}

fn delta_pct(d: Option<f64>) -> String {
    d.map_or_else(|| "-".to_string(), |d| fx(100.0 * d, 2))
}

fn study_failures(run: &mut Run, a: &crate::args::FailureArgs) -> Result<()> {
    let space = study_space(run, &a.candidates)?;
    let opts = StudyOptions { route: route(a.route), blocks: a.blocks };
    let m = &run.model;
    let rows = run.phases.time("study", || run_failure_study(m, &space, &a.costs.0, &opts))?;
    let mut csv = format!(
        "cost_usd_per_mwh,{},profit_nf_musd,{},profit_f_musd,delta_pct\n",
        plan_headers(m, "b_nf"),
        plan_headers(m, "b_f")
    );
    let mut table =
        format!("{:>6} {:>20} {:>12} {:>20} {:>12} {:>9}\n", "C^P", "B^NF", "profit_NF", "B^F", "profit_F", "delta_%");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.cost,
            plan_columns(m, &r.plan_nf).join(","),
            fx(r.profit_nf / 1e6, 6),
            plan_columns(m, &r.plan_f).join(","),
            fx(r.profit_f / 1e6, 6),
            delta_pct(r.delta)
        );
        let _ = writeln!(
            table,
            "{:>6} {:>20} {:>12} {:>20} {:>12} {:>9}",
            r.cost,
            r.plan_nf.describe(m),
            fx(r.profit_nf / 1e6, 4),
            r.plan_f.describe(m),
            fx(r.profit_f / 1e6, 4),
            delta_pct(r.delta)
        );
    }
    print!("{table}");
    run.put("study_failures.csv", csv);
    Ok(())
}

fn study_correlation(run: &mut Run, a: &crate::args::CorrelationArgs) -> Result<()> {
    let space = study_space(run, &a.candidates)?;
    let wind = wind_set(run, &a.wind, true)?.expect("wind is required here");
    let opts = StudyOptions { route: route(a.route), blocks: a.blocks };
    let seed = run.seed();
    let m = &run.model;
    let rows = run.phases.time("study", || run_correlation_study(m, &space, &wind, &a.turbines, seed, &opts))?;
    let mut csv = format!(
        "n_turbines,invest_cost_musd_per_yr,{},profit_nc_musd,{},profit_c_musd,delta_pct\n",
        plan_headers(m, "b_nc"),
        plan_headers(m, "b_c")
    );
    let mut table = format!(
        "{:>6} {:>10} {:>14} {:>12} {:>14} {:>12} {:>9}\n",
        "N^T", "C^I", "B^NC", "profit_NC", "B^C", "profit_C", "delta_%"
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.turbines,
            fx(r.invest_cost / 1e6, 6),
            plan_columns(m, &r.plan_nc).join(","),
            fx(r.profit_nc / 1e6, 6),
            plan_columns(m, &r.plan_c).join(","),
            fx(r.profit_c / 1e6, 6),
            delta_pct(r.delta)
        );
        let _ = writeln!(
            table,
            "{:>6} {:>10} {:>14} {:>12} {:>14} {:>12} {:>9}",
            r.turbines,
            fx(r.invest_cost / 1e6, 2),
            r.plan_nc.describe(m),
            fx(r.profit_nc / 1e6, 4),
            r.plan_c.describe(m),
            fx(r.profit_c / 1e6, 4),
            delta_pct(r.delta)
        );
    }
    print!("{table}");
    run.put("study_correlation.csv", csv);
    Ok(())
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gep", version, about = "Generation-expansion planning under failures and correlated wind")]
pub struct Cli {
    /// Data set directory (buses.csv, lines.csv, units.csv, blocks.csv, ...).
    #[arg(long, global = true, default_value = "data/rts24")]
    pub data: PathBuf,
    /// Study configuration; defaults to <data>/config.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel clearing and plan scoring.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Also write the LPs solved by the command as MPS files here.
    #[arg(long, global = true, value_name = "DIR")]
    pub dump_lp: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check the data set, then print a summary.
    Validate,
    /// Write the availability scenarios and, with wind, the wind-speed set.
    Scenarios(ScenarioArgs),
    /// Clear the market in every (scenario, block, year) cell.
    Clear(ClearArgs),
    /// Find the profit-maximizing expansion plan.
    Plan(PlanArgs),
    /// Value of modelling equipment failures across a marginal cost sweep.
    StudyFailures(FailureArgs),
    /// Value of modelling wind correlation across farm sizes.
    StudyCorrelation(CorrelationArgs),
}

#[derive(Debug, Args, Clone)]
pub struct WindArgs {
    /// Wind-speed file; synthesized from the data set's targets otherwise.
    #[arg(long)]
    pub wind: Option<PathBuf>,
    /// Number of synthesized wind scenarios.
    #[arg(long = "scenarios", default_value_t = 200)]
    pub n_wind: usize,
    /// Cap on the combined scenario count; overrides the configuration.
    #[arg(long)]
    pub max_scenarios: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Simultaneous outages per scenario; the configuration's value by default.
    #[arg(long)]
    pub outages: Option<usize>,
    /// Replace the wind set by a decorrelated copy with the same marginals.
    #[arg(long)]
    pub decorrelate: bool,
    #[command(flatten)]
    pub wind: WindArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioSelect {
    /// Simultaneous outages per scenario; 0 clears the all-available state only.
    #[arg(long, default_value_t = 0)]
    pub outages: usize,
    /// Merge the load blocks into this many.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[command(flatten)]
    pub wind: WindArgs,
}

#[derive(Debug, Args)]
pub struct ClearArgs {
    /// Plan as JSON lines of {"asset", "bus", "year"}; nothing built otherwise.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[command(flatten)]
    pub select: ScenarioSelect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Milp,
    Oracle,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Oracle,
    Milp,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value_t = Mode::Milp)]
    pub mode: Mode,
    /// Relative optimality gap; overrides the configuration.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Branch-and-bound time limit in seconds; overrides the configuration.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// CSV (id, candidate_buses) restricting where assets may be built.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[command(flatten)]
    pub select: ScenarioSelect,
}

#[derive(Debug, Args)]
pub struct FailureArgs {
    /// Candidate marginal costs in $/MWh: `A..B` (inclusive, integers) or a comma list.
    #[arg(long, value_parser = parse_costs, default_value = "15..24")]
    pub costs: CostSweep,
    #[arg(long, value_enum, default_value_t = Route::Oracle)]
    pub route: Route,
    /// Merge the load blocks into this many.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelationArgs {
    /// Turbines per candidate farm, comma separated; the data set's sizes by default.
    #[arg(long, value_delimiter = ',')]
    pub turbines: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Route::Oracle)]
    pub route: Route,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    #[command(flatten)]
    pub wind: WindArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSweep(pub Vec<f64>);

pub fn parse_costs(s: &str) -> Result<CostSweep, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| format!("`{a}` is not an integer"))?;
        let b: i64 = b.trim().parse().map_err(|_| format!("`{b}` is not an integer"))?;
        if a > b {
            return Err(format!("empty range {a}..{b}"));
        }
        return Ok(CostSweep((a..=b).map(|c| c as f64).collect()));
    }
    let costs = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().ok().filter(|c| c.is_finite()).ok_or_else(|| format!("`{c}` is not a cost")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CostSweep(costs))
}

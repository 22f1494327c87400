use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::lp::{solve_lp_with, Basis, LinearProgram, LpSolution, LpStatus, Sense, SolverOptions};
use crate::system::StudyConfig;

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Relative gap at which the search stops; zero proves optimality.
    pub gap: f64,
    pub time_limit: Option<Duration>,
    /// Plans within this relative distance of the best count as tied.
    pub tie_tol: f64,
    pub int_tol: f64,
    pub lp: SolverOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions { gap: 0.0, time_limit: None, tie_tol: 1e-6, int_tol: 1e-6, lp: SolverOptions::default() }
    }
}

impl BnbOptions {
    pub fn from_config(cfg: &StudyConfig) -> Self {
        BnbOptions {
            gap: cfg.mip_gap,
            time_limit: (cfg.time_limit > 0.0).then(|| Duration::from_secs_f64(cfg.time_limit)),
            lp: SolverOptions { duality_tol: cfg.duality_tol, ..SolverOptions::default() },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnbOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub timed_out: bool,
}

struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Best bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth)).then(other.id.cmp(&self.id))
    }
}

/// Maximize `lp` with the columns in `integers` restricted to integers.
///
/// Best-first search with most-fractional branching. With a zero gap the
/// search keeps every subtree whose bound ties the incumbent, and among all
/// integer solutions tied with the best it returns the one with the
/// smallest `key`. The all-zero assignment is solved first as the initial
/// incumbent when it is feasible.
pub fn branch_and_bound<K: Ord>(
    lp: &LinearProgram,
    integers: &[usize],
    opts: &BnbOptions,
    key: impl Fn(&[f64]) -> K,
) -> Result<Option<BnbOutcome>> {
    assert_eq!(lp.sense, Sense::Maximize, "branch_and_bound maximizes");
    let start = Instant::now();
    let mut work = lp.clone();
    // Node relaxations are certified against the size of the objective.
    let lp_opts = SolverOptions {
        gap_scale: lp.objective.iter().fold(1.0f64, |a, c| a.max(c.abs())),
        track_stats: false,
        ..opts.lp.clone()
    };
    let base_lo: Vec<f64> = integers.iter().map(|&c| lp.lower[c].ceil()).collect();
    let base_up: Vec<f64> = integers.iter().map(|&c| lp.upper[c].floor()).collect();
    let mut nodes = 0usize;
    let mut incumbents: Vec<(K, f64, Vec<f64>)> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let tie_abs = |best: f64| opts.tie_tol * (1.0 + best.abs());
    let prune = |bound: f64, best: f64| {
        if opts.gap > 0.0 {
            bound <= best + opts.gap * (1.0 + best.abs())
        } else {
            bound < best - tie_abs(best)
        }
    };
    let mut solve = |lo: &[f64], up: &[f64], warm: Option<&Basis>, nodes: &mut usize| -> Result<LpSolution> {
        for (k, &c) in integers.iter().enumerate() {
            work.lower[c] = lo[k];
            work.upper[c] = up[k];
        }
        *nodes += 1;
        Ok(solve_lp_with(&work, &lp_opts, warm)?)
    };
    let integral = |x: &[f64]| integers.iter().all(|&c| (x[c] - x[c].round()).abs() <= opts.int_tol);

    let zero_lo: Vec<f64> = base_lo.iter().map(|l| l.max(0.0)).collect();
    let zero_up: Vec<f64> = base_up.iter().map(|u| u.min(0.0)).collect();
    if zero_lo.iter().zip(&zero_up).all(|(l, u)| l <= u) {
        let sol = solve(&zero_lo, &zero_up, None, &mut nodes)?;
        if sol.status == LpStatus::Optimal {
            best = sol.objective;
            incumbents.push((key(&sol.x), sol.objective, sol.x));
        }
    }

    let root = solve(&base_lo, &base_up, None, &mut nodes)?;
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(Error::Solver("MILP relaxation is unbounded".into())),
        LpStatus::Infeasible => return Ok(None),
    }
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut timed_out = false;
    let mut consider = |sol: LpSolution,
                        lo: Vec<f64>,
                        up: Vec<f64>,
                        depth: usize,
                        heap: &mut BinaryHeap<Node>,
                        best: &mut f64,
                        incumbents: &mut Vec<(K, f64, Vec<f64>)>| {
        if sol.status != LpStatus::Optimal || prune(sol.objective, *best) {
            return;
        }
        if integral(&sol.x) {
            if sol.objective > *best {
                *best = sol.objective;
            }
            incumbents.push((key(&sol.x), sol.objective, sol.x.clone()));
        }
        next_id += 1;
        heap.push(Node { id: next_id, depth, bound: sol.objective, lo, up, x: sol.x, basis: sol.basis });
    };
    consider(root, base_lo.clone(), base_up.clone(), 0, &mut heap, &mut best, &mut incumbents);

    while let Some(node) = heap.pop() {
        if prune(node.bound, best) {
            continue;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() > t) {
            timed_out = true;
            heap.push(node);
            break;
        }
        // Most fractional column, else the first column not yet fixed.
        let mut pick: Option<(usize, f64)> = None;
        for (k, &c) in integers.iter().enumerate() {
            let f = (node.x[c] - node.x[c].floor()).min(node.x[c].ceil() - node.x[c]);
            if f > opts.int_tol && pick.is_none_or(|p| f > p.1 + 1e-12) {
                pick = Some((k, f));
            }
        }
        let k = match pick {
            Some((k, _)) => k,
            None => match (0..integers.len()).find(|&k| node.lo[k] < node.up[k]) {
                Some(k) => k,
                None => continue,
            },
        };
        let v = node.x[integers[k]];
        let split = if pick.is_some() { v.floor() } else { v.round() };
        // Down child gets `<= split`, up child `>= split + 1` for fractional
        // values; an integral value `v` is split into `<= v` / `>= v + 1`,
        // or `<= v - 1` / `>= v` when `v` already sits at the upper limit.
        let (down_up, up_lo) =
            if pick.is_none() && split >= node.up[k] { (split - 1.0, split) } else { (split, split + 1.0) };
        for (lo_k, up_k) in [(node.lo[k], down_up), (up_lo, node.up[k])] {
            if lo_k > up_k {
                continue;
            }
            let mut lo = node.lo.clone();
            let mut up = node.up.clone();
            lo[k] = lo_k;
            up[k] = up_k;
            let sol = solve(&lo, &up, Some(&node.basis), &mut nodes)?;
            consider(sol, lo, up, node.depth + 1, &mut heap, &mut best, &mut incumbents);
        }
    }

    if incumbents.is_empty() {
        return Ok(None);
    }
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_abs(best);
    let (_, objective, x) = incumbents
        .into_iter()
        .filter(|i| i.1 >= best - tol)
        .min_by(|a, b| a.0.cmp(&b.0))
        .expect("best incumbent passes its own filter");
    Ok(Some(BnbOutcome { x, objective, bound: best.max(open_bound), nodes, timed_out }))
}

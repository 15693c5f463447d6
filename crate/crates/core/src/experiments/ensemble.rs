use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{default_max_days, red_for_gap, ExperimentConfig, VariantSpec};
use super::{apply_scheme, wilson_interval, Scheme};
use crate::analytics::{lazy_failure_bound, theorem1_failure_bound, BoundReport};
use crate::dynamics::{run_with, RunOptions, Trajectory, Winner};
use crate::error::{Error, Result};
use crate::graph::sample_gnp;
use crate::rng::derive_stream;

/// One parameter point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub p: f64,
    pub scheme: Scheme,
    pub variant: VariantSpec,
    pub max_days: usize,
}

impl Cell {
    pub fn gap(&self) -> Option<f64> {
        self.scheme.gap(self.n)
    }

    /// `pn / ln n - 1` (with `p p_ac` in place of `p` for lazy runs): the
    /// largest `lambda` with `pn >= (1 + lambda) ln n`.
    pub fn effective_lambda(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let rate = match self.variant {
            VariantSpec::Deterministic => self.p,
            VariantSpec::Lazy { p_ac, .. } => self.p * p_ac,
        };
        rate * self.n as f64 / (self.n as f64).ln() - 1.0
    }

    pub fn bound_report(&self) -> BoundReport {
        let n = self.n as f64;
        let gap = self.scheme.expected_gap(self.n);
        let lambda = self.effective_lambda();
        match self.variant {
            VariantSpec::Deterministic => theorem1_failure_bound(n, self.p, gap, lambda),
            VariantSpec::Lazy { p_ac, p_up } => {
                lazy_failure_bound(n, self.p, gap, lambda, p_ac, p_up).expect("default (c, D) is valid")
            }
        }
    }
}

/// Per-trial summary.
#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub winner: Winner,
    pub t_win: Option<usize>,
    pub period: Option<u8>,
    pub t_star: Option<usize>,
    pub truncated: bool,
    pub initial_blue: usize,
    /// `|B_1|`, `|B_2|`; `None` only if the run stopped before that day
    /// without fixing the future.
    pub b1: Option<usize>,
    pub b2: Option<usize>,
    /// Blue count of the final state (the larger one of a 2-cycle).
    pub remnant: usize,
    /// Mean degree of that Blue set, if nonempty.
    pub remnant_avg_degree: Option<f64>,
    /// Some initially Blue vertex has no neighbors.
    pub isolated_initial_blue: bool,
    pub blue_counts: Vec<usize>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl TrialOutcome {
    pub fn red_within(&self, days: usize) -> bool {
        self.winner == Winner::Red && self.t_win.is_some_and(|t| t <= days)
    }
}

/// Blue count on `day`, extending a finished trajectory by its absorbing
/// state or cycle.
fn blue_on_day(t: &Trajectory, day: usize) -> Option<usize> {
    if day < t.blue_counts.len() {
        return Some(t.blue_counts[day]);
    }
    if t.winner != Winner::None {
        return t.blue_counts.last().copied();
    }
    match (t.period, t.t_star) {
        (Some(k), Some(ts)) => Some(t.blue_counts[ts + (day - ts) % k as usize]),
        _ => None,
    }
}

fn run_trial(cell: &Cell, master_seed: u64, i: usize, snapshots: bool) -> Result<TrialOutcome> {
    let g = sample_gnp(cell.n, cell.p, &mut derive_stream(master_seed, 2 * i as u64))?;
    let mut rng = derive_stream(master_seed, 2 * i as u64 + 1);
    let c0 = apply_scheme(&cell.scheme, cell.n, &mut rng)?;
    let traj = run_with(
        &g,
        &c0,
        cell.variant.to_variant()?,
        cell.max_days,
        &mut rng,
        RunOptions {
            keep_snapshots: snapshots,
        },
    )?;
    let remnant_set = traj
        .final_colorings
        .iter()
        .max_by_key(|c| c.blue_count())
        .expect("final coloring present");
    let remnant = remnant_set.blue_count();
    let remnant_avg_degree = (remnant > 0).then(|| {
        remnant_set.blue_vertices().map(|v| g.degree(v) as f64).sum::<f64>() / remnant as f64
    });
    let isolated_initial_blue = c0.blue_vertices().any(|v| g.degree(v) == 0);
    Ok(TrialOutcome {
        trial: i,
        winner: traj.winner,
        t_win: traj.t_win,
        period: traj.period,
        t_star: traj.t_star,
        truncated: traj.truncated,
        initial_blue: c0.blue_count(),
        b1: blue_on_day(&traj, 1),
        b2: blue_on_day(&traj, 2),
        remnant,
        remnant_avg_degree,
        isolated_initial_blue,
        blue_counts: traj.blue_counts.clone(),
        trajectory: snapshots.then_some(traj),
    })
}

/// Aggregates for one cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub master_seed: u64,
    pub trials: usize,
    pub red_wins: usize,
    pub blue_wins: usize,
    pub none: usize,
    pub truncated: usize,
    /// Win day -> number of Red wins on that day.
    pub red_win_days: BTreeMap<usize, usize>,
    pub blue_win_days: BTreeMap<usize, usize>,
    pub mean_win_day: Option<f64>,
    pub max_win_day: Option<usize>,
    pub b1_mean: f64,
    /// Unbiased sample variance.
    pub b1_var: f64,
    /// Wilson 95% interval for the Red-win probability.
    pub red_win_ci: (f64, f64),
    pub bound: BoundReport,
    pub outcomes: Vec<TrialOutcome>,
}

impl CellResult {
    fn aggregate(cell: Cell, master_seed: u64, outcomes: Vec<TrialOutcome>) -> Result<Self> {
        let trials = outcomes.len();
        let mut red_win_days = BTreeMap::new();
        let mut blue_win_days = BTreeMap::new();
        let (mut red, mut blue, mut none, mut truncated) = (0, 0, 0, 0);
        for o in &outcomes {
            match o.winner {
                Winner::Red => {
                    red += 1;
                    *red_win_days.entry(o.t_win.unwrap()).or_insert(0) += 1;
                }
                Winner::Blue => {
                    blue += 1;
                    *blue_win_days.entry(o.t_win.unwrap()).or_insert(0) += 1;
                }
                Winner::None => none += 1,
            }
            truncated += usize::from(o.truncated);
        }
        let win_days: Vec<usize> = outcomes.iter().filter_map(|o| o.t_win).collect();
        let mean_win_day =
            (!win_days.is_empty()).then(|| win_days.iter().sum::<usize>() as f64 / win_days.len() as f64);
        let b1: Vec<f64> = outcomes.iter().filter_map(|o| o.b1.map(|b| b as f64)).collect();
        let (b1_mean, b1_var) = mean_var(&b1);
        Ok(Self {
            cell,
            master_seed,
            trials,
            red_wins: red,
            blue_wins: blue,
            none,
            truncated,
            red_win_days,
            blue_win_days,
            mean_win_day,
            max_win_day: win_days.iter().copied().max(),
            b1_mean,
            b1_var,
            red_win_ci: wilson_interval(red, trials, 1.96)?,
            bound: cell.bound_report(),
            outcomes,
        })
    }

    pub fn red_within(&self, days: usize) -> usize {
        self.outcomes.iter().filter(|o| o.red_within(days)).count()
    }

    pub fn fraction(&self, count: usize) -> f64 {
        count as f64 / self.trials as f64
    }
}

pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let or_base = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let ns = if cfg.sweep.n.is_empty() { vec![cfg.n] } else { cfg.sweep.n.clone() };
    let mut out = Vec::new();
    for &n in &ns {
        for &p in &or_base(&cfg.sweep.p, cfg.p) {
            let mut schemes = Vec::new();
            if !cfg.sweep.delta.is_empty() {
                for &d in &cfg.sweep.delta {
                    schemes.push(match cfg.scheme {
                        Scheme::FixedGap { .. } => Scheme::FixedGap {
                            red_count: red_for_gap(n, d)?,
                        },
                        Scheme::DefectorModel { .. } => Scheme::DefectorModel { delta: d as usize },
                        _ => return Err(Error::Config("delta sweep needs a gap scheme".into())),
                    });
                }
            } else if !cfg.sweep.p_r.is_empty() {
                schemes.extend(cfg.sweep.p_r.iter().map(|&p_r| Scheme::RandomBiased { p_r }));
            } else {
                schemes.push(cfg.scheme);
            }
            for scheme in schemes {
                scheme.validate(n)?;
                let max_days = match cfg.max_days {
                    Some(m) => m,
                    None => default_max_days(n, p, cfg.variant)?,
                };
                out.push(Cell {
                    n,
                    p,
                    scheme,
                    variant: cfg.variant,
                    max_days,
                });
            }
        }
    }
    Ok(out)
}

/// Runs every cell on the global thread pool. Trial `i` of every cell uses
/// stream `2i` for the graph and `2i + 1` for the initial coloring and
/// lazy coin flips, so results do not depend on scheduling.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let cells = cells(cfg)?;
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(&cell, cfg.master_seed, i, cfg.snapshots))
            .collect::<Result<Vec<_>>>()?;
        results.push(CellResult::aggregate(cell, cfg.master_seed, outcomes)?);
    }
    Ok(EnsembleResult {
        config: cfg.clone(),
        cells: results,
    })
}

/// [`run_ensemble`] on a dedicated pool of `threads` workers.
pub fn run_ensemble_threads(cfg: &ExperimentConfig, threads: usize) -> Result<EnsembleResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_ensemble(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{preset, ExperimentConfig};

    #[test]
    fn complete_graph_one_day_win() {
        let mut cfg = ExperimentConfig::new(10, 1.0, Scheme::FixedGap { red_count: 6 }, 20, 3);
        cfg.max_days = Some(5);
        let r = run_ensemble(&cfg).unwrap();
        let c = &r.cells[0];
        assert_eq!(c.red_wins, 20);
        assert_eq!(c.red_win_days.get(&1), Some(&20));
        assert_eq!(c.red_wins + c.blue_wins + c.none, c.trials);
    }

    #[test]
    fn single_trial_is_deterministic() {
        let cfg = ExperimentConfig::new(50, 0.2, Scheme::RandomHalf, 1, 99);
        let a = serde_json::to_string(&run_ensemble(&cfg).unwrap().cells[0].outcomes).unwrap();
        let b = serde_json::to_string(&run_ensemble(&cfg).unwrap().cells[0].outcomes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_cells() {
        let cfg = preset("conjecture_sweep", 0).unwrap();
        let cs = cells(&cfg).unwrap();
        assert_eq!(cs.len(), 24);
        assert_eq!(cs[0].scheme, Scheme::FixedGap { red_count: 501 });
        assert_eq!(cs[23].scheme, Scheme::FixedGap { red_count: 516 });
        assert_eq!(cells(&preset("biased", 0).unwrap()).unwrap().len(), 4);
    }

    #[test]
    fn day_lookup_extends_cycles() {
        let t = Trajectory {
            winner: Winner::None,
            t_win: None,
            period: Some(2),
            t_star: Some(0),
            truncated: false,
            blue_counts: vec![1, 1, 1],
            snapshots: None,
            final_colorings: vec![],
        };
        assert_eq!(blue_on_day(&t, 5), Some(1));
        let t = Trajectory {
            winner: Winner::Red,
            t_win: Some(0),
            period: Some(1),
            t_star: Some(0),
            truncated: false,
            blue_counts: vec![0],
            snapshots: None,
            final_colorings: vec![],
        };
        assert_eq!(blue_on_day(&t, 2), Some(0));
    }
}

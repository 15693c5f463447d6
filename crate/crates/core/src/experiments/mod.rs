//! Monte Carlo ensembles over initial-coloring schemes and parameter grids.

mod config;
mod ensemble;
mod report;

pub use config::{default_max_days, preset, ConfigMap, ExperimentConfig, Sweep, VariantSpec, PRESET_NAMES};
pub use ensemble::{run_ensemble, run_ensemble_threads, Cell, CellResult, EnsembleResult, TrialOutcome};
pub use report::{bound_vs_measured, cell_rows, write_csv, write_json, Row, CSV_HEADER};

use serde::Serialize;

use crate::bitset::BitSet;
use crate::coloring::Coloring;
use crate::error::{check_probability, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Scheme {
    /// Vertices `0..red_count` Red.
    FixedGap { red_count: usize },
    /// Each vertex Red with probability 1/2.
    RandomHalf,
    /// Each vertex Red with probability `p_r`.
    RandomBiased { p_r: f64 },
    /// Even split `0..n/2` Red, then `delta` uniformly chosen Red vertices
    /// switch to Blue. Requires even `n`.
    DefectorModel { delta: usize },
}

impl Scheme {
    pub fn uses_rng(&self) -> bool {
        !matches!(self, Scheme::FixedGap { .. })
    }

    /// `|R_0| - n/2` when it is fixed by the scheme.
    pub fn gap(&self, n: usize) -> Option<f64> {
        match *self {
            Scheme::FixedGap { red_count } => Some(red_count as f64 - n as f64 / 2.0),
            Scheme::DefectorModel { delta } => Some(-(delta as f64)),
            _ => None,
        }
    }

    /// `E|R_0| - n/2`.
    pub fn expected_gap(&self, n: usize) -> f64 {
        match *self {
            Scheme::RandomHalf => 0.0,
            Scheme::RandomBiased { p_r } => (p_r - 0.5) * n as f64,
            _ => self.gap(n).unwrap(),
        }
    }

    pub fn p_r(&self) -> Option<f64> {
        match *self {
            Scheme::RandomHalf => Some(0.5),
            Scheme::RandomBiased { p_r } => Some(p_r),
            _ => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Scheme::FixedGap { red_count } if red_count > n => {
                Err(Error::Config(format!("red_count {red_count} exceeds n = {n}")))
            }
            Scheme::RandomBiased { p_r } => check_probability("p_r", p_r),
            Scheme::DefectorModel { delta } => {
                if n % 2 != 0 {
                    Err(Error::Config(format!("defector scheme needs even n, got {n}")))
                } else if delta > n / 2 {
                    Err(Error::Config(format!("defector count {delta} exceeds n/2 = {}", n / 2)))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Draws an initial coloring. Only the random schemes read from `rng`:
/// one Bernoulli per vertex in index order, or for the defector scheme a
/// partial Fisher–Yates shuffle of `0..n/2` using `delta` bounded draws.
pub fn apply_scheme(scheme: &Scheme, n: usize, rng: &mut RngStream) -> Result<Coloring> {
    scheme.validate(n)?;
    Ok(match *scheme {
        Scheme::FixedGap { red_count } => Coloring::red_prefix(n, red_count),
        Scheme::RandomHalf => bernoulli_coloring(n, 0.5, rng),
        Scheme::RandomBiased { p_r } => bernoulli_coloring(n, p_r, rng),
        Scheme::DefectorModel { delta } => {
            let half = n / 2;
            let mut idx: Vec<usize> = (0..half).collect();
            let mut c = Coloring::red_prefix(n, half);
            for i in 0..delta {
                let j = i + rng.below((half - i) as u64) as usize;
                idx.swap(i, j);
                c.set(idx[i], crate::coloring::Color::Blue);
            }
            c
        }
    })
}

fn bernoulli_coloring(n: usize, p: f64, rng: &mut RngStream) -> Coloring {
    let mut red = BitSet::new(n);
    for v in 0..n {
        if rng.bernoulli(p) {
            red.insert(v);
        }
    }
    Coloring::from_red_set(red)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::Domain(format!("need 0 <= successes <= trials, trials >= 1 (got {successes}/{trials})")));
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

//! Synchronous and lazy majority dynamics.
//!
//! A vertex with more Red than Blue neighbors becomes Red, more Blue than
//! Red becomes Blue, and keeps its color on a tie (isolated vertices always
//! tie). In the lazy variant each transition first draws an activation set
//! and then, among active vertices, an update set; updaters apply the same
//! rule but only count neighbors that are active in that transition.
//!
//! Lazy randomness protocol per transition: one Bernoulli(p_ac) per vertex
//! in index order, then one Bernoulli(p_up) per active vertex in index
//! order.

use serde::{Serialize, Serializer};

use crate::bitset::BitSet;
use crate::coloring::{Color, Coloring};
use crate::error::{check_probability, Error, Result};
use crate::graph::Graph;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LazyParams {
    pub p_ac: f64,
    pub p_up: f64,
}

impl LazyParams {
    pub fn new(p_ac: f64, p_up: f64) -> Result<Self> {
        check_probability("p_ac", p_ac)?;
        check_probability("p_up", p_up)?;
        Ok(Self { p_ac, p_up })
    }

    /// With every vertex active and updating the lazy rule is the
    /// synchronous rule.
    pub fn is_synchronous(&self) -> bool {
        self.p_ac == 1.0 && self.p_up == 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    Deterministic,
    Lazy(LazyParams),
}

/// Red neighbors minus Blue neighbors.
pub fn delta(g: &Graph, c: &Coloring, v: usize) -> i64 {
    if let Some(row) = g.dense_row(v) {
        let rc = popcount_and(row, c.red_set().words());
        2 * rc as i64 - g.degree(v) as i64
    } else {
        let nb = g.csr_neighbors(v).expect("csr layout");
        let rc = nb.iter().filter(|&&u| c.is_red(u as usize)).count();
        2 * rc as i64 - nb.len() as i64
    }
}

#[inline]
fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

#[inline]
fn popcount_and3(a: &[u64], b: &[u64], c: &[u64]) -> u32 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| (x & y & z).count_ones())
        .sum()
}

#[inline]
fn rule(d: i64, old: bool) -> bool {
    match d.signum() {
        1 => true,
        -1 => false,
        _ => old,
    }
}

/// One synchronous day. The input is not modified.
pub fn majority_step(g: &Graph, c: &Coloring) -> Coloring {
    let n = g.n();
    assert_eq!(n, c.n(), "coloring size differs from graph");
    let mut red = BitSet::new(n);
    let red_words = c.red_set().words();
    for v in 0..n {
        let d = if let Some(row) = g.dense_row(v) {
            2 * popcount_and(row, red_words) as i64 - g.degree(v) as i64
        } else {
            let nb = g.csr_neighbors(v).expect("csr layout");
            let mut rc = 0i64;
            for &u in nb {
                rc += ((red_words[(u >> 6) as usize] >> (u & 63)) & 1) as i64;
            }
            2 * rc - nb.len() as i64
        };
        if rule(d, c.is_red(v)) {
            red.insert(v);
        }
    }
    Coloring::from_red_set(red)
}

pub struct LazyStep {
    pub coloring: Coloring,
    pub active: BitSet,
    pub updating: BitSet,
}

/// One lazy transition. Returns the new coloring and the sets drawn.
pub fn lazy_step(g: &Graph, c: &Coloring, params: LazyParams, rng: &mut RngStream) -> LazyStep {
    let n = g.n();
    assert_eq!(n, c.n(), "coloring size differs from graph");
    let mut active = BitSet::new(n);
    for v in 0..n {
        if rng.bernoulli(params.p_ac) {
            active.insert(v);
        }
    }
    let mut updating = BitSet::new(n);
    for v in active.iter() {
        if rng.bernoulli(params.p_up) {
            updating.insert(v);
        }
    }
    let mut next = c.clone();
    let red_words = c.red_set().words();
    let active_words = active.words();
    for v in updating.iter() {
        let d = if let Some(row) = g.dense_row(v) {
            let ac = popcount_and(row, active_words) as i64;
            let rc = popcount_and3(row, active_words, red_words) as i64;
            2 * rc - ac
        } else {
            let mut d = 0i64;
            for &u in g.csr_neighbors(v).expect("csr layout") {
                let u = u as usize;
                if active.contains(u) {
                    d += if c.is_red(u) { 1 } else { -1 };
                }
            }
            d
        };
        let new_red = rule(d, c.is_red(v));
        next.set(v, if new_red { Color::Red } else { Color::Blue });
    }
    LazyStep {
        coloring: next,
        active,
        updating,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    Red,
    Blue,
    None,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Red => "Red",
            Winner::Blue => "Blue",
            Winner::None => "None",
        }
    }
}

impl Serialize for Winner {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub winner: Winner,
    /// Day of first unanimity.
    pub t_win: Option<usize>,
    /// Eventual period (1 or 2) when detected.
    pub period: Option<u8>,
    /// First day from which the coloring repeats with `period`.
    pub t_star: Option<usize>,
    pub truncated: bool,
    /// `blue_counts[t]` is the Blue count on day `t`.
    pub blue_counts: Vec<usize>,
    /// Every day's coloring, when requested.
    pub snapshots: Option<Vec<Coloring>>,
    /// Colorings of the final cycle (one for period 1, two for period 2),
    /// or the last coloring reached when no period was detected.
    pub final_colorings: Vec<Coloring>,
}

impl Trajectory {
    /// Number of transitions performed.
    pub fn days(&self) -> usize {
        self.blue_counts.len() - 1
    }

    pub fn snapshot(&self, day: usize) -> Result<&Coloring> {
        let s = self.snapshots.as_ref().ok_or(Error::MissingSnapshots)?;
        s.get(day)
            .ok_or_else(|| Error::Domain(format!("day {day} beyond trajectory end {}", s.len() - 1)))
    }

    pub fn last_coloring(&self) -> &Coloring {
        self.final_colorings.last().expect("trajectory has a final coloring")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trajectory serializes")
    }
}

impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            winner: Winner,
            t_win: Option<usize>,
            period: Option<u8>,
            t_star: Option<usize>,
            truncated: bool,
            blue_counts: &'a [usize],
        }
        Record {
            winner: self.winner,
            t_win: self.t_win,
            period: self.period,
            t_star: self.t_star,
            truncated: self.truncated,
            blue_counts: &self.blue_counts,
        }
        .serialize(s)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub keep_snapshots: bool,
}

/// Runs until unanimity, a detected period (deterministic rule only), or
/// `max_days` transitions.
pub fn run(
    g: &Graph,
    c0: &Coloring,
    variant: Variant,
    max_days: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    run_with(g, c0, variant, max_days, rng, RunOptions::default())
}

pub fn run_with(
    g: &Graph,
    c0: &Coloring,
    variant: Variant,
    max_days: usize,
    rng: &mut RngStream,
    opts: RunOptions,
) -> Result<Trajectory> {
    if max_days == 0 {
        return Err(Error::Domain("max_days must be at least 1".into()));
    }
    if g.n() != c0.n() {
        return Err(Error::InvalidSize(format!(
            "coloring has {} vertices, graph has {}",
            c0.n(),
            g.n()
        )));
    }
    // Period detection is only sound when the update rule is a fixed map.
    let detect_period = match variant {
        Variant::Deterministic => true,
        Variant::Lazy(lp) => lp.is_synchronous(),
    };
    let mut blue_counts = vec![c0.blue_count()];
    let mut snapshots = opts.keep_snapshots.then(|| vec![c0.clone()]);
    let finish = |winner, t_win, period, t_star, truncated, blue_counts, snapshots, finals| {
        Ok(Trajectory {
            winner,
            t_win,
            period,
            t_star,
            truncated,
            blue_counts,
            snapshots,
            final_colorings: finals,
        })
    };
    if let Some(col) = c0.unanimous() {
        let w = winner_of(col);
        return finish(w, Some(0), Some(1), Some(0), false, blue_counts, snapshots, vec![c0.clone()]);
    }
    let mut prev: Option<Coloring> = None;
    let mut cur = c0.clone();
    for t in 0..max_days {
        let next = match variant {
            Variant::Deterministic => majority_step(g, &cur),
            Variant::Lazy(lp) => lazy_step(g, &cur, lp, rng).coloring,
        };
        blue_counts.push(next.blue_count());
        if let Some(s) = snapshots.as_mut() {
            s.push(next.clone());
        }
        if let Some(col) = next.unanimous() {
            let w = winner_of(col);
            return finish(w, Some(t + 1), Some(1), Some(t + 1), false, blue_counts, snapshots, vec![next]);
        }
        if detect_period {
            if next == cur {
                return finish(Winner::None, None, Some(1), Some(t), false, blue_counts, snapshots, vec![next]);
            }
            if prev.as_ref() == Some(&next) {
                return finish(
                    Winner::None,
                    None,
                    Some(2),
                    Some(t - 1),
                    false,
                    blue_counts,
                    snapshots,
                    vec![cur, next],
                );
            }
        }
        prev = Some(std::mem::replace(&mut cur, next));
    }
    finish(Winner::None, None, None, None, true, blue_counts, snapshots, vec![cur])
}

fn winner_of(c: Color) -> Winner {
    match c {
        Color::Red => Winner::Red,
        Color::Blue => Winner::Blue,
    }
}

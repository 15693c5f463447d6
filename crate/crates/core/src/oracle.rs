//! Exact probabilities for small instances.
//!
//! Whole-graph quantities enumerate every edge subset of `K_n` and run a
//! self-contained bitmask implementation of the update rule, independent of
//! [`crate::dynamics`]. Day-one vertex statistics use the exact law of
//! `delta_0(v) = Bin(|R \ v|, p) - Bin(|B \ v|, p)`.

use serde::Serialize;

use crate::coloring::Coloring;
use crate::error::{check_probability, Error, Result};

pub const MAX_ENUM_N: usize = 6;
pub const MAX_LAZY_ENUM_N: usize = 5;
pub const MAX_MOMENTS_N: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WinProbs {
    pub red: f64,
    pub blue: f64,
    pub none: f64,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

/// Probability of each edge count `e` for one specific edge subset.
fn subset_weights(edges: usize, p: f64) -> Vec<f64> {
    (0..=edges)
        .map(|e| {
            if p == 0.0 {
                if e == 0 { 1.0 } else { 0.0 }
            } else if p == 1.0 {
                if e == edges { 1.0 } else { 0.0 }
            } else {
                (e as f64 * p.ln() + (edges - e) as f64 * (-p).ln_1p()).exp()
            }
        })
        .collect()
}

/// Adjacency masks of the graph selected by `mask` over `pairs`.
fn adjacency(pairs: &[(usize, usize)], mask: u32) -> [u8; MAX_ENUM_N] {
    let mut adj = [0u8; MAX_ENUM_N];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        if (mask >> i) & 1 == 1 {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
    }
    adj
}

/// One synchronous step on a red-mask. Each vertex compares Red and Blue
/// neighbor counts; ties keep the old color.
fn step_mask(n: usize, adj: &[u8], red: u8) -> u8 {
    let all = ((1u16 << n) - 1) as u8;
    let mut next = 0u8;
    for v in 0..n {
        let r = (adj[v] & red).count_ones();
        let b = (adj[v] & !red & all).count_ones();
        let was_red = (red >> v) & 1 == 1;
        if r > b || (r == b && was_red) {
            next |= 1 << v;
        }
    }
    next
}

/// Lazy step on a red-mask with fixed active and updating sets.
fn lazy_step_mask(n: usize, adj: &[u8], red: u8, active: u8, updating: u8) -> u8 {
    let mut next = red;
    for v in 0..n {
        if (updating >> v) & 1 == 0 {
            continue;
        }
        let seen = adj[v] & active;
        let r = (seen & red).count_ones();
        let b = (seen & !red).count_ones();
        if r > b {
            next |= 1 << v;
        } else if r < b {
            next &= !(1 << v);
        }
    }
    next
}

fn coloring_mask(c: &Coloring) -> u8 {
    (0..c.n()).filter(|&v| c.is_red(v)).fold(0u8, |m, v| m | (1 << v))
}

fn check_enum(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::InvalidSize(format!("exact enumeration supports 1 <= n <= {cap}, got {n}")));
    }
    Ok(())
}

/// Exact Red / Blue / no-unanimity probabilities for synchronous dynamics
/// on G(n, p) from `c0`, counting unanimity reached within `max_days`.
pub fn exact_win_prob(n: usize, p: f64, c0: &Coloring, max_days: usize) -> Result<WinProbs> {
    check_enum(n, MAX_ENUM_N)?;
    check_probability("p", p)?;
    if c0.n() != n {
        return Err(Error::InvalidSize("coloring size differs from n".into()));
    }
    let pairs = pairs(n);
    let weights = subset_weights(pairs.len(), p);
    let all = ((1u16 << n) - 1) as u8;
    let start = coloring_mask(c0);
    let (mut red, mut blue, mut none) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1 << pairs.len()) {
        let w = weights[mask.count_ones() as usize];
        if w == 0.0 {
            continue;
        }
        let adj = adjacency(&pairs, mask);
        let mut x = start;
        let mut day = 0;
        while x != all && x != 0 && day < max_days {
            let y = step_mask(n, &adj, x);
            if y == x {
                break;
            }
            x = y;
            day += 1;
        }
        if x == all {
            red += w;
        } else if x == 0 {
            blue += w;
        } else {
            none += w;
        }
    }
    Ok(WinProbs { red, blue, none })
}

/// Exact law of `|B_1|` under synchronous dynamics, by graph enumeration.
pub fn exact_day1_distribution(n: usize, p: f64, c0: &Coloring) -> Result<Vec<f64>> {
    check_enum(n, MAX_ENUM_N)?;
    check_probability("p", p)?;
    let pairs = pairs(n);
    let weights = subset_weights(pairs.len(), p);
    let start = coloring_mask(c0);
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1 << pairs.len()) {
        let w = weights[mask.count_ones() as usize];
        let adj = adjacency(&pairs, mask);
        let red = step_mask(n, &adj, start);
        dist[n - red.count_ones() as usize] += w;
    }
    Ok(dist)
}

/// Exact law of `|B_1|` for one lazy transition, enumerating graphs,
/// activation sets and update sets.
pub fn exact_lazy_day1_distribution(n: usize, p: f64, p_ac: f64, p_up: f64, c0: &Coloring) -> Result<Vec<f64>> {
    check_enum(n, MAX_LAZY_ENUM_N)?;
    check_probability("p", p)?;
    check_probability("p_ac", p_ac)?;
    check_probability("p_up", p_up)?;
    let pairs = pairs(n);
    let gw = subset_weights(pairs.len(), p);
    let aw = subset_weights(n, p_ac);
    let start = coloring_mask(c0);
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1 << pairs.len()) {
        let wg = gw[mask.count_ones() as usize];
        if wg == 0.0 {
            continue;
        }
        let adj = adjacency(&pairs, mask);
        for active in 0u8..(1 << n) {
            let k = active.count_ones() as usize;
            let wa = aw[k];
            if wa == 0.0 {
                continue;
            }
            let uw = subset_weights(k, p_up);
            // Enumerate subsets of `active`.
            let mut updating = active;
            loop {
                let wu = uw[updating.count_ones() as usize];
                if wu != 0.0 {
                    let red = lazy_step_mask(n, &adj, start, active, updating);
                    dist[n - red.count_ones() as usize] += wg * wa * wu;
                }
                if updating == 0 {
                    break;
                }
                updating = (updating - 1) & active;
            }
        }
    }
    Ok(dist)
}

fn binomial_pmf(m: usize, p: f64) -> Vec<f64> {
    if p == 0.0 || p == 1.0 || m == 0 {
        let mut v = vec![0.0; m + 1];
        v[if p == 1.0 { m } else { 0 }] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let lgm = libm::lgamma(m as f64 + 1.0);
    (0..=m)
        .map(|k| {
            let lc = lgm - libm::lgamma(k as f64 + 1.0) - libm::lgamma((m - k) as f64 + 1.0);
            (lc + k as f64 * lp + (m - k) as f64 * lq).exp()
        })
        .collect()
}

/// Law of `Bin(r, p) - Bin(b, p)` on the support `[-b, r]`.
struct DiffLaw {
    b: usize,
    pmf: Vec<f64>,
    /// `cdf[i] = Pr(D <= i - b)`
    cdf: Vec<f64>,
}

impl DiffLaw {
    fn new(r: usize, b: usize, p: f64) -> Self {
        let pr = binomial_pmf(r, p);
        let pb = binomial_pmf(b, p);
        let mut pmf = vec![0.0; r + b + 1];
        for (x, &wx) in pr.iter().enumerate() {
            if wx == 0.0 {
                continue;
            }
            for (y, &wy) in pb.iter().enumerate() {
                pmf[x + b - y] += wx * wy;
            }
        }
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        Self { b, pmf, cdf }
    }

    fn at(&self, k: i64) -> f64 {
        let i = k + self.b as i64;
        if i < 0 || i as usize >= self.pmf.len() {
            0.0
        } else {
            self.pmf[i as usize]
        }
    }

    fn below(&self, k: i64) -> f64 {
        let i = k - 1 + self.b as i64;
        if i < 0 {
            0.0
        } else if i as usize >= self.cdf.len() {
            1.0
        } else {
            self.cdf[i as usize]
        }
    }

    /// `Pr(D + shift < 0) + [blue] Pr(D + shift = 0)`.
    fn blue_next(&self, shift: i64, blue: bool) -> f64 {
        self.below(-shift) + if blue { self.at(-shift) } else { 0.0 }
    }
}

/// Exact `Pr(v in B_1)` for synchronous dynamics from `c0`.
pub fn exact_day1_vertex_prob(n: usize, p: f64, c0: &Coloring, v: usize) -> Result<f64> {
    check_probability("p", p)?;
    if c0.n() != n || v >= n {
        return Err(Error::InvalidSize(format!("vertex {v} / coloring size {} vs n = {n}", c0.n())));
    }
    let blue = !c0.is_red(v);
    let r = c0.red_count() - usize::from(!blue);
    let b = c0.blue_count() - usize::from(blue);
    Ok(DiffLaw::new(r, b, p).blue_next(0, blue))
}

/// Exact mean and variance of `|B_1|`.
///
/// The law of `delta_0(v)` only depends on the color of `v`, and the joint
/// law of `(delta_0(u), delta_0(v))` only on the colors of `u` and `v`; given
/// the status of the edge `uv` the two are independent. So
/// `Pr(u, v in B_1) = p Pr(E_u) Pr(E_v) + (1-p) Pr(F_u) Pr(F_v)`, where `E`
/// and `F` are the single-vertex events conditioned on the edge being
/// present and absent.
pub fn exact_day1_moments(n: usize, p: f64, c0: &Coloring) -> Result<(f64, f64)> {
    check_probability("p", p)?;
    if n == 0 || n > MAX_MOMENTS_N {
        return Err(Error::InvalidSize(format!("exact moments support 1 <= n <= {MAX_MOMENTS_N}, got {n}")));
    }
    if c0.n() != n {
        return Err(Error::InvalidSize("coloring size differs from n".into()));
    }
    let (rc, bc) = (c0.red_count(), c0.blue_count());
    let single = |blue: bool| -> f64 {
        let r = rc - usize::from(!blue);
        let b = bc - usize::from(blue);
        DiffLaw::new(r, b, p).blue_next(0, blue)
    };
    // Joint probability for u, v of the given colors (u != v).
    let joint = |u_blue: bool, v_blue: bool| -> f64 {
        let r = rc - usize::from(!u_blue) - usize::from(!v_blue);
        let b = bc - usize::from(u_blue) - usize::from(v_blue);
        let law = DiffLaw::new(r, b, p);
        let shift_from = |other_blue: bool| if other_blue { -1 } else { 1 };
        let eu = law.blue_next(shift_from(v_blue), u_blue);
        let ev = law.blue_next(shift_from(u_blue), v_blue);
        let fu = law.blue_next(0, u_blue);
        let fv = law.blue_next(0, v_blue);
        p * eu * ev + (1.0 - p) * fu * fv
    };
    let (pr, pb) = (
        if rc > 0 { single(false) } else { 0.0 },
        if bc > 0 { single(true) } else { 0.0 },
    );
    let (rcf, bcf) = (rc as f64, bc as f64);
    let mean = rcf * pr + bcf * pb;
    let mut var = rcf * pr * (1.0 - pr) + bcf * pb * (1.0 - pb);
    if rc >= 2 {
        var += rcf * (rcf - 1.0) * (joint(false, false) - pr * pr);
    }
    if bc >= 2 {
        var += bcf * (bcf - 1.0) * (joint(true, true) - pb * pb);
    }
    if rc >= 1 && bc >= 1 {
        var += 2.0 * rcf * bcf * (joint(false, true) - pr * pb);
    }
    Ok((mean, var.max(0.0)))
}

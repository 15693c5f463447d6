//! Closed-form constants and probability bounds for majority dynamics on
//! G(n, p), evaluated in `f64`.
//!
//! Conventions worth knowing before reading the code:
//!
//! * `h(x) = x ln x + (1 - x) ln(1 - x)` is non-positive on `(0, 1)`.
//! * [`f_rate`] takes `(d, x_next, y_today)`: the entropy term is charged to
//!   the *current* Blue fraction `y_today` and the drift term to the target
//!   fraction `x_next`, i.e. `F = d * x_next * g_star(y_today) + 2 h(y_today)`.
//! * `g_star(y) = 1 - y/2 - (3/2) y^(1/3) (1 - y)^(2/3)`, which equals
//!   `-g_y(t_y)` for the exponential-moment exponent `g_y` at its minimiser
//!   `t_y = ln(1/y - 1) / 3`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};

/// Berry–Esseen constant used throughout.
pub const C_BE: f64 = 0.56;

/// Constants used by the headline failure bound.
pub const THEOREM_C: f64 = 10.0;
pub const THEOREM_D: f64 = 0.21;
pub const THEOREM_B: f64 = 0.25;

/// Standard normal CDF.
pub fn phi(a: f64) -> f64 {
    0.5 * libm::erfc(-a / SQRT_2)
}

/// `phi(a) - 1/2`, computed without cancellation near 0.
pub fn phi0(a: f64) -> f64 {
    0.5 * libm::erf(a / SQRT_2)
}

/// Day-one drift constant `D_c = phi0(2 - 1/c) - C_BE / c`.
pub fn d_c(c: f64) -> f64 {
    phi0(2.0 - 1.0 / c) - C_BE / c
}

/// `C(c, D) = 7 / (12 (D_c - D)^2)`; requires `D < D_c`.
pub fn c_day1(c: f64, d: f64) -> Result<f64> {
    let dc = d_c(c);
    if !(d < dc) {
        return Err(Error::Precondition(format!("D = {d} must be below D_c({c}) = {dc}")));
    }
    Ok(7.0 / (12.0 * (dc - d).powi(2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Day1Bound {
    /// Blue count that day one stays at or below, with high probability.
    pub threshold: f64,
    /// Upper bound on the probability that it does not.
    pub fail_prob: f64,
}

/// Day-one Blue-count bound for `|R_0| = n/2 + delta`.
pub fn day1_bound(n: f64, p: f64, delta: f64, c: f64, d: f64) -> Result<Day1Bound> {
    let c_max = (p * delta).min((p * (1.0 - p) * n).sqrt());
    if !(c > 0.0 && c <= c_max) {
        return Err(Error::Precondition(format!(
            "need 0 < c <= min(p*delta, sqrt(p(1-p)n)) = {c_max}, got c = {c}"
        )));
    }
    if !(d > 0.0) {
        return Err(Error::Precondition(format!("need D > 0, got {d}")));
    }
    let cd = c_day1(c, d)?;
    let threshold = n / 2.0 - d * n.min(delta * (p * n).sqrt());
    let fail_prob = (cd / n.min(p * delta * delta)).min(1.0);
    Ok(Day1Bound { threshold, fail_prob })
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")))
    }
}

/// Binary entropy with the sign convention `h(x) <= 0`.
pub fn h(x: f64) -> Result<f64> {
    check_open_unit("x", x)?;
    Ok(x * x.ln() + (1.0 - x) * (-x).ln_1p())
}

/// Minimiser of `g_x`.
pub fn t_x(x: f64) -> f64 {
    (1.0 / x - 1.0).ln() / 3.0
}

/// Exponential-moment exponent `g_x(t) = (1 - e^-t)(x(e^2t + e^t + 2)/2 - 1)`.
pub fn g_x(x: f64, t: f64) -> f64 {
    -(-t).exp_m1() * (x * ((2.0 * t).exp() + t.exp() + 2.0) / 2.0 - 1.0)
}

/// `-g_y(t_y)`, evaluated from the exponent directly.
pub fn g_star(y: f64) -> Result<f64> {
    check_open_unit("y", y)?;
    Ok(-g_x(y, t_x(y)))
}

/// Closed form of [`g_star`].
pub fn g_star_closed(y: f64) -> Result<f64> {
    check_open_unit("y", y)?;
    Ok(1.0 - y / 2.0 - 1.5 * y.cbrt() * (1.0 - y).cbrt().powi(2))
}

/// Rate function `F(d, x_next, y_today) = d x_next g_star(y_today) + 2 h(y_today)`.
pub fn f_rate(d: f64, x_next: f64, y_today: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("d = {d} must be positive")));
    }
    check_open_unit("x_next", x_next)?;
    Ok(d * x_next * g_star_closed(y_today)? + 2.0 * h(y_today)?)
}

/// Day-two drift condition `b a^2 > (3/2) ln 2`.
pub fn step2_condition(a: f64, b: f64) -> bool {
    b * a * a > 1.5 * LN_2
}

/// Probability bound that more than `b n` vertices are Blue on day two,
/// given at most `(1/2 - a / sqrt(pn)) n` on day one:
/// `min(1, exp(-n F(pn, b, b1)) / b)`.
///
/// Returns 0 when `b1 <= 0`: no Blue vertex survives day one, so none exist
/// on day two.
pub fn step2_fail_bound(n: f64, p: f64, a: f64, b: f64) -> f64 {
    let pn = p * n;
    let b1 = 0.5 - a / pn.sqrt();
    if b1 <= 0.0 {
        return 0.0;
    }
    match f_rate(pn, b, b1) {
        Ok(f) => ((-n * f).exp() / b).min(1.0),
        Err(_) => 1.0,
    }
}

/// `(N_eps, alpha_eps) = (ceil(4/eps + 4), exp(-(8/eps + 7)))`.
pub fn degree_threshold(eps: f64) -> Result<(u64, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon = {eps} must be positive")));
    }
    Ok(((4.0 / eps + 4.0).ceil() as u64, (-(8.0 / eps + 7.0)).exp()))
}

/// Upper-tail bound `Pr(X >= pm + t)` for `X` dominated by `Bin(m, p)`.
pub fn chernoff_upper(p: f64, m: f64, t: f64) -> f64 {
    let e1 = t * t / (2.0 * (p * m + t));
    let e2 = t * t / (2.0 * (1.0 - p) * m);
    (-e1.max(e2)).exp()
}

/// `C_BE (1 - 2 sigma^2) / (sigma sqrt(n))`, `sigma^2 = p(1-p)`.
pub fn berry_esseen_bound(n: f64, p: f64) -> f64 {
    let var = p * (1.0 - p);
    C_BE * (1.0 - 2.0 * var) / (var.sqrt() * n.sqrt())
}

/// `1.12 (1 - 2 sigma^2) / (sigma sqrt(n1 + n2))`.
pub fn point_mass_bound(n1: f64, n2: f64, p: f64) -> f64 {
    let var = p * (1.0 - p);
    2.0 * C_BE * (1.0 - 2.0 * var) / (var.sqrt() * (n1 + n2).sqrt())
}

/// Mean and variance of the number of isolated vertices inside a fixed set
/// of `b0` vertices of G(n, p).
pub fn isolated_moments(b0: u64, n: u64, p: f64) -> Result<(f64, f64)> {
    if b0 > n {
        return Err(Error::Domain(format!("b0 = {b0} exceeds n = {n}")));
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let q = 1.0 - p;
    let b = b0 as f64;
    let nf = n as f64;
    let iso = q.powf(nf - 1.0);
    let mean = b * iso;
    let pairs = if b0 >= 2 && n >= 2 {
        b * (b - 1.0) * p * q.powf(2.0 * nf - 3.0)
    } else {
        0.0
    };
    let var = pairs + mean - b * q.powf(2.0 * nf - 2.0);
    Ok((mean, var))
}

/// Average-degree lemma hypothesis: `0 < delta < 1 - lambda`, `0 < eps < 1`
/// and `eps ln(e/eps) <= delta/4`.
pub fn subcon_avg_deg_check(lambda: f64, delta: f64, eps: f64) -> bool {
    lambda > 0.0
        && lambda < 1.0
        && delta > 0.0
        && delta < 1.0 - lambda
        && eps > 0.0
        && eps < 1.0
        && eps * (1.0 - eps.ln()) <= delta / 4.0
}

/// Theorem-level form of the same hypothesis, `eps ln(e/eps) <= lambda/4`.
pub fn subcon_theorem_check(lambda: f64, eps: f64) -> bool {
    lambda > 0.0 && lambda < 1.0 && eps > 0.0 && eps < 1.0 && eps * (1.0 - eps.ln()) <= lambda / 4.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: f64,
    pub p: f64,
    pub delta: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_ac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_up: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Term {
    pub value: f64,
    /// False for asymptotic terms, whose `value` is the exponent only.
    pub explicit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const ASYMPTOTIC_NOTE: &str = "asymptotic, no explicit constant";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub terms: BTreeMap<String, Term>,
    pub flags: BTreeMap<String, bool>,
}

impl BoundReport {
    fn new(inputs: BoundInputs) -> Self {
        Self {
            inputs,
            terms: BTreeMap::new(),
            flags: BTreeMap::new(),
        }
    }

    fn term(&mut self, name: &str, value: f64) {
        self.terms.insert(
            name.to_string(),
            Term {
                value,
                explicit: true,
                note: None,
            },
        );
    }

    fn noted(&mut self, name: &str, value: f64, explicit: bool, note: &str) {
        self.terms.insert(
            name.to_string(),
            Term {
                value,
                explicit,
                note: Some(note.to_string()),
            },
        );
    }

    fn flag(&mut self, name: &str, v: bool) {
        self.flags.insert(name.to_string(), v);
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.terms.get(name).map(|t| t.value)
    }
}

/// Failure-probability budget for Red unanimity under synchronous dynamics
/// with `|R_0| = n/2 + delta`, using `c = 10`, `D = 0.21`, `b = 1/4`.
///
/// Explicit terms: `day1_term = 14 / min(n, p delta^2)`, `step2_fail`
/// from [`step2_fail_bound`], `step3_term = 2 n^(-lambda/2)` and their sum
/// `total`. The spectral shrink factor depends on an unspecified universal
/// constant `C` and is reported per `(C + 1)^2`.
pub fn theorem1_failure_bound(n: f64, p: f64, delta: f64, lambda: f64) -> BoundReport {
    let mut r = BoundReport::new(BoundInputs {
        n,
        p,
        delta,
        lambda,
        p_ac: None,
        p_up: None,
    });
    let pn = p * n;
    let (c, d, b) = (THEOREM_C, THEOREM_D, THEOREM_B);
    let dc = d_c(c);
    r.term("c", c);
    r.term("D", d);
    r.term("d_c", dc);
    let cd = c_day1(c, d).expect("D = 0.21 is below D_c(10)");
    r.term("c_day1", cd);
    let denom = n.min(p * delta * delta);
    r.noted("day1_term", (14.0 / denom).min(f64::MAX), true, "14 / min{n, p delta^2}");
    r.noted("day1_term_exact", (cd / denom).min(f64::MAX), true, "C(c, D) / min{n, p delta^2}");
    let a = d * pn.sqrt().min(p * delta);
    r.term("a", a);
    r.term("b", b);
    let step2_ok = step2_condition(a, b);
    let step2 = if a > 0.0 { step2_fail_bound(n, p, a, b) } else { 1.0 };
    r.term("step2_fail", step2);
    if lambda > 0.0 {
        let alpha = (-(8.0 / lambda + 7.0)).exp();
        r.term("alpha_lambda", alpha);
        let shrink = (1.0 - b) / (alpha * alpha * (0.5 - b).powi(2));
        r.noted("shrink_factor_per_c1_sq", shrink, true, "A / (C + 1)^2 with C unspecified");
    }
    let step3 = 2.0 * n.powf(-lambda / 2.0);
    r.noted("step3_term", step3, true, "2 n^(-lambda/2)");
    r.term("total", r.value("day1_term").unwrap() + step2 + step3);

    r.flag("n - 10 >= pn", n - 10.0 >= pn);
    r.flag("pn >= (1 + lambda) log n", pn >= (1.0 + lambda) * n.ln());
    r.flag("p delta >= 10", p * delta >= 10.0);
    r.flag("min{sqrt(p(1-p)n), p delta} >= 10", (p * (1.0 - p) * n).sqrt().min(p * delta) >= 10.0);
    r.flag("b a^2 > 3 log 2 / 2", step2_ok);
    r.flag("lambda > 0", lambda > 0.0);
    r
}

/// Lazy-dynamics failure terms at the default `(c, D) = (10, 0.21)`.
pub fn lazy_failure_bound(n: f64, p: f64, delta: f64, lambda: f64, p_ac: f64, p_up: f64) -> Result<BoundReport> {
    lazy_failure_bound_at(n, p, delta, lambda, p_ac, p_up, THEOREM_C, THEOREM_D)
}

/// Lazy-dynamics failure terms. Only the day-one term
/// `2 C(c, D) / (p_up^2 p_ac^2 min(n, p p_ac delta^2))` has an explicit
/// constant; the remaining terms are reported as their exponents.
#[allow(clippy::too_many_arguments)]
pub fn lazy_failure_bound_at(
    n: f64,
    p: f64,
    delta: f64,
    lambda: f64,
    p_ac: f64,
    p_up: f64,
    c: f64,
    d: f64,
) -> Result<BoundReport> {
    let mut r = BoundReport::new(BoundInputs {
        n,
        p,
        delta,
        lambda,
        p_ac: Some(p_ac),
        p_up: Some(p_up),
    });
    let cd = c_day1(c, d)?;
    r.term("c", c);
    r.term("D", d);
    r.term("d_c", d_c(c));
    r.term("c_day1", cd);
    let denom = p_up * p_up * p_ac * p_ac * n.min(p * p_ac * delta * delta);
    r.noted(
        "lazy_day1",
        (2.0 * cd / denom).min(f64::MAX),
        true,
        "2 C(c, D) / (p_up^2 p_ac^2 min{n, p p_ac delta^2})",
    );
    let day2_exp = p_up * p_up * p_ac.powi(4) * p * delta * delta;
    r.noted("day2_exponent", day2_exp, false, &format!("exp(-Omega(x)); {ASYMPTOTIC_NOTE}"));
    r.noted("step3_exponent", lambda / 4.0, false, &format!("O(n^-x); {ASYMPTOTIC_NOTE}"));
    r.noted("final_exponent", p_up * p_ac, false, &format!("n^-Omega(x); {ASYMPTOTIC_NOTE}"));
    r.flag("p p_ac n >= (1 + lambda) log n", p * p_ac * n >= (1.0 + lambda) * n.ln());
    r.flag("p_up p_ac^2 p delta >= 10", p_up * p_ac * p_ac * p * delta >= 10.0);
    r.flag("lambda > 0", lambda > 0.0);
    Ok(r)
}

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use majlab::analytics::{degree_threshold, isolated_moments, phi, phi0};
use majlab::{derive_stream, sample_gnp};

const PI_DIGITS: &str = "31415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679";

/// Fixed-point digits carried by the series oracle.
const SCALE: u32 = 90;

fn pow10(k: u32) -> BigInt {
    BigInt::from(10u32).pow(k)
}

/// `Phi(num / den)` from the Taylor series of erf in exact integer
/// arithmetic with `SCALE` decimal digits. The largest partial term at
/// |x| = 8 is about 1e13, so roughly 75 significant digits survive.
fn phi_series(num: i64, den: i64) -> f64 {
    let one = pow10(SCALE);
    let pi = BigInt::parse_bytes(PI_DIGITS.as_bytes(), 10).unwrap() * pow10(SCALE) / pow10(PI_DIGITS.len() as u32 - 1);
    // 1 / sqrt(2 pi) at scale 10^SCALE.
    let sqrt_2pi = (BigInt::from(2) * &pi * &one).sqrt();
    let inv = &one * &one / sqrt_2pi;
    let x2_num = BigInt::from(num) * num;
    let x2_den = BigInt::from(den) * den;
    // t_k = x^(2k+1) / (2^k k!)
    let mut t = BigInt::from(num) * &one / den;
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    loop {
        let term = &t / (2 * k + 1);
        if k % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        if t.is_zero() || (k > 10 && term.abs() < BigInt::one()) {
            break;
        }
        t = t * &x2_num / (&x2_den * BigInt::from(2 * (k + 1)));
        k += 1;
    }
    let value: BigInt = &one / BigInt::from(2) + sum * inv / &one;
    let top = value / pow10(SCALE - 40);
    top.to_f64().unwrap() / 1e40
}

#[test]
fn phi_matches_series_oracle_on_grid() {
    // x = i / 625 covers [-8, 8] with 10001 points.
    let mut worst: f64 = 0.0;
    for i in -5000i64..=5000 {
        let x = i as f64 / 625.0;
        let exact = phi_series(i, 625);
        let err = (phi(x) - exact).abs();
        worst = worst.max(err);
        assert!(err <= 1e-12, "x = {x}: phi = {}, oracle = {exact}", phi(x));
        assert!((phi0(x) - (exact - 0.5)).abs() <= 1e-12);
    }
    assert!(worst < 1e-12, "worst {worst}");
}

#[test]
fn series_oracle_reference_value() {
    assert!((phi_series(19, 10) - 0.971_283_440_183_998).abs() < 1e-15);
}

fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

#[test]
fn isolated_moments_match_monte_carlo() {
    let (n, b0, p) = (20usize, 10usize, 0.1);
    let samples = 100_000;
    let counts: Vec<f64> = (0..samples)
        .map(|s| {
            let g = sample_gnp(n, p, &mut derive_stream(77, s)).unwrap();
            (0..b0).filter(|&v| g.degree(v) == 0).count() as f64
        })
        .collect();
    let (m, v, m4) = moments(&counts);
    let (em, ev) = isolated_moments(b0 as u64, n as u64, p).unwrap();
    let se_m = (v / samples as f64).sqrt();
    let se_v = ((m4 - v * v) / samples as f64).sqrt();
    assert!((m - em).abs() <= 4.0 * se_m, "mean {m} vs {em} (se {se_m})");
    assert!((v - ev).abs() <= 4.0 * se_v, "variance {v} vs {ev} (se {se_v})");
}

#[test]
fn minimum_degree_lower_bound_holds_empirically() {
    let (big_n, alpha) = degree_threshold(1.0).unwrap();
    let graphs = 10_000;
    for n in [200usize, 500] {
        assert!(n as u64 >= big_n);
        let p = 2.0 * (n as f64).ln() / n as f64;
        let low = (0..graphs)
            .filter(|&s| {
                let g = sample_gnp(n, p, &mut derive_stream(n as u64, s as u64)).unwrap();
                (g.min_degree() as f64) < alpha * p * n as f64
            })
            .count();
        let target = (n as f64).powf(-0.5);
        let se = (target * (1.0 - target) / graphs as f64).sqrt();
        let frac = low as f64 / graphs as f64;
        assert!(frac <= target + 3.0 * se, "n={n}: {frac} > {target} + 3 se");
    }
}

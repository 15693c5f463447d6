//! Acceptance suite. Runs every criterion at its stated size and tolerance
//! and prints one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::time::{Duration, Instant};

use majlab::analytics::{berry_esseen_bound, chernoff_upper, d_c, point_mass_bound};
use majlab::experiments::{
    apply_scheme, default_max_days, preset, run_ensemble, run_ensemble_threads, wilson_interval, write_csv,
    write_json, EnsembleResult, ExperimentConfig, Scheme, VariantSpec,
};
use majlab::oracle::{exact_day1_moments, exact_win_prob};
use majlab::spectral::{default_max_iter, min_opnorm, norm_concentration, shrink_check, DEFAULT_TOL};
use majlab::{derive_stream, majority_step, run, run_with, sample_gnp, Coloring, RunOptions, Variant, Winner};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn power_of_few(res: &EnsembleResult, t: Duration) -> Outcome {
    let c = &res.cells[0];
    let frac = c.fraction(c.red_within(4));
    outcome(
        frac >= 0.88 && within(t, 60.0),
        format!("Red unanimous within 4 days in {frac:.4} of {} trials (need >= 0.88); {:.1}s (budget 60s)", c.trials, t.as_secs_f64()),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let trials = 100_000;
    let mut checked = 0;
    let mut worst = String::new();
    let mut pass = true;
    for n in 1..=5usize {
        let max_days = 4 * n;
        for p in [0.2, 0.5, 0.8] {
            // Vertex exchangeability reduces colorings to the Red count.
            for red in 0..=n {
                let exact = exact_win_prob(n, p, &Coloring::red_prefix(n, red), max_days).expect("oracle");
                let mut cfg = ExperimentConfig::new(n, p, Scheme::FixedGap { red_count: red }, trials, SEED + n as u64);
                cfg.max_days = Some(max_days);
                let c = &run_ensemble(&cfg).expect("ensemble").cells[0];
                for (name, count, prob) in [
                    ("red", c.red_wins, exact.red),
                    ("blue", c.blue_wins, exact.blue),
                    ("none", c.none, exact.none),
                ] {
                    let (lo, hi) = wilson_interval(count, trials, 4.0).unwrap();
                    checked += 1;
                    if !(lo - 1e-12 <= prob && prob <= hi + 1e-12) {
                        pass = false;
                        worst = format!("{worst} [n={n} p={p} red={red} {name}: exact {prob:.5} vs [{lo:.5}, {hi:.5}]]");
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        pass && within(t, 300.0),
        format!("{checked} frequencies within 4-sigma Wilson of exact; {:.1}s (budget 300s){worst}", t.as_secs_f64()),
    )
}

fn day1_moments() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, p, gap) in [(1000usize, 0.5, 5usize), (500, 0.1, 100)] {
        let nf = n as f64;
        let (mean, var) = exact_day1_moments(n, p, &Coloring::red_prefix(n, n / 2 + gap)).expect("moments");
        let g = gap as f64;
        let c = (p * g).min((p * (1.0 - p) * nf).sqrt());
        let mean_bound = nf / 2.0 - d_c(c) * nf.min(g * (p * nf).sqrt());
        let var_bound = 7.0 * nf / 12.0;
        pass &= var <= var_bound && mean <= mean_bound;
        parts.push(format!("(n={n}, p={p}, gap={gap}): E={mean:.3} <= {mean_bound:.3}, Var={var:.3} <= {var_bound:.3}"));
    }
    let t = start.elapsed();
    outcome(pass && within(t, 60.0), format!("{}; {:.2}s", parts.join("; "), t.as_secs_f64()))
}

fn period_two() -> Outcome {
    let per_cell = 1112; // 9 cells -> 10008 runs
    let mut runs = 0;
    let mut bad = 0;
    for n in [16usize, 64, 256] {
        for p in [0.05, 0.2, 0.5] {
            let mut cfg = ExperimentConfig::new(n, p, Scheme::RandomHalf, per_cell, SEED);
            cfg.max_days = Some(4 * n);
            let c = &run_ensemble(&cfg).expect("ensemble").cells[0];
            runs += c.trials;
            bad += c
                .outcomes
                .iter()
                .filter(|o| o.truncated || !matches!(o.period, Some(1 | 2)))
                .count();
        }
    }
    outcome(bad == 0, format!("{runs} runs, {bad} truncated or without period in {{1, 2}}"))
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = (1.0 - p).powi(n as i32);
    for k in 0..n {
        pmf[k + 1] = pmf[k] * (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
    }
    pmf
}

fn dominance() -> Outcome {
    let start = Instant::now();
    let slack = 1e-12;
    let mut fails = Vec::new();
    let mut count = 0;
    // Normal approximation of a centered binomial, sup over all real x.
    for n in (10..=200).step_by(10) {
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let pmf = binomial_pmf(n, p);
            let sd = (p * (1.0 - p) * n as f64).sqrt();
            let mut cdf = 0.0;
            let mut gap: f64 = 0.0;
            for (k, m) in pmf.iter().enumerate() {
                let z = majlab::analytics::phi((k as f64 - p * n as f64) / sd);
                gap = gap.max((cdf - z).abs());
                cdf += m;
                gap = gap.max((cdf.min(1.0) - z).abs());
            }
            let bound = berry_esseen_bound(n as f64, p);
            count += 1;
            if gap > bound + slack {
                fails.push(format!("BE n={n} p={p}: {gap} > {bound}"));
            }
        }
    }
    // Point mass Pr(X1 = X2 + d).
    for m in 5..=50usize {
        for p in [0.2, 0.5, 0.8] {
            let pmf = binomial_pmf(m, p);
            for d in 1..=5usize {
                let exact: f64 = (0..=m - d).map(|k| pmf[k + d] * pmf[k]).sum();
                let bound = point_mass_bound(m as f64, m as f64, p);
                count += 1;
                if exact > bound + slack {
                    fails.push(format!("point mass n1=n2={m} d={d} p={p}: {exact} > {bound}"));
                }
            }
        }
    }
    // Tail of Bin(Y, p) with Y on [0, m]: the worst law of Y is a point mass.
    for m in 1..=30usize {
        for p in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95] {
            let mut tails = Vec::with_capacity(m + 1);
            for k in 0..=m {
                let pmf = binomial_pmf(k, p);
                let mut suffix = vec![0.0; k + 2];
                for j in (0..=k).rev() {
                    suffix[j] = suffix[j + 1] + pmf[j];
                }
                tails.push(suffix);
            }
            for ti in 1..=(4 * m) {
                let t = ti as f64 / 4.0;
                let thr = (p * m as f64 + t).ceil() as usize;
                let worst = tails.iter().map(|s| if thr < s.len() { s[thr] } else { 0.0 }).fold(0.0, f64::max);
                let bound = chernoff_upper(p, m as f64, t);
                count += 1;
                if worst > bound + slack {
                    fails.push(format!("chernoff m={m} p={p} t={t}: {worst} > {bound}"));
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        fails.is_empty() && within(t, 120.0),
        format!("{count} exact-vs-bound comparisons, {} violations; {:.2}s {}", fails.len(), t.as_secs_f64(), fails.join("; ")),
    )
}

fn spectral_shrink() -> Outcome {
    let n = 500;
    let b = 0.25;
    let graphs_per_p = 34;
    let colorings_per_graph = 10;
    let mut trajectories = 0;
    let mut steps = 0;
    let mut failures = 0;
    for (pi, p) in [0.05, 0.1, 0.5].into_iter().enumerate() {
        for gi in 0..graphs_per_p {
            let base = ((pi * graphs_per_p + gi) * (colorings_per_graph + 1)) as u64;
            let g = sample_gnp(n, p, &mut derive_stream(SEED, base)).unwrap();
            let density = 2.0 * g.edge_count() as f64 / (n * (n - 1)) as f64;
            let (_, norm) = min_opnorm(&g, &[p, density], DEFAULT_TOL, default_max_iter(n)).unwrap();
            for ci in 0..colorings_per_graph {
                let mut rng = derive_stream(SEED, base + 1 + ci as u64);
                // Alternate balanced starts with starts already below b n.
                let scheme = if ci % 2 == 0 { Scheme::RandomHalf } else { Scheme::RandomBiased { p_r: 0.8 } };
                let c0 = apply_scheme(&scheme, n, &mut rng).unwrap();
                let opts = RunOptions { keep_snapshots: true };
                let traj = run_with(&g, &c0, Variant::Deterministic, 4 * n, &mut rng, opts).unwrap();
                let report = shrink_check(&g, &traj, b, norm.norm).unwrap();
                trajectories += 1;
                steps += report.steps.len();
                failures += report.steps.iter().filter(|s| !s.pass).count();
            }
        }
    }
    outcome(
        failures == 0 && trajectories >= 1000,
        format!("{trajectories} trajectories, {steps} checked steps, {failures} violations (b = {b})"),
    )
}

fn norm_ratios() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [0.01, 0.1, 0.5] {
        let ratios = norm_concentration(1000, p, 20, SEED, DEFAULT_TOL).unwrap();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        pass &= ratios.len() == 20 && ratios.iter().all(|r| r.is_finite() && *r > 0.0 && *r <= 3.0);
        parts.push(format!("p={p}: max {max:.4}"));
    }
    outcome(pass, format!("n=1000, 20 samples each, ratios <= 3: {}; {:.1}s", parts.join(", "), start.elapsed().as_secs_f64()))
}

fn subconnectivity() -> Outcome {
    let cfg = preset("subconnectivity", SEED).unwrap();
    let res = run_ensemble(&cfg).unwrap();
    let c = &res.cells[0];
    let n = c.cell.n as f64;
    let p = c.cell.p;
    let trials = c.trials as f64;
    let iso = c.outcomes.iter().filter(|o| o.isolated_initial_blue).count() as f64 / trials;
    let fixated = c.outcomes.iter().all(|o| !o.truncated && matches!(o.period, Some(1 | 2)));
    let mut remnants: Vec<usize> = c.outcomes.iter().map(|o| o.remnant).collect();
    remnants.sort_unstable();
    let median = if remnants.len() % 2 == 1 {
        remnants[remnants.len() / 2] as f64
    } else {
        (remnants[remnants.len() / 2 - 1] + remnants[remnants.len() / 2]) as f64 / 2.0
    };
    let ref_deg = 3.0 * (p * n).sqrt();
    let reported = c.outcomes.iter().all(|o| (o.remnant > 0) == o.remnant_avg_degree.is_some());
    let deg_ok = c.outcomes.iter().filter(|o| o.remnant_avg_degree.map_or(true, |d| d <= ref_deg)).count() as f64 / trials;
    let gap = c.cell.gap().unwrap();
    let pass = iso >= 0.9 && fixated && median <= 0.05 * n && reported && deg_ok >= 0.95;
    outcome(
        pass,
        format!(
            "(a) isolated initial Blue in {iso:.3} (>= 0.9); (b) all fixate with period <= 2: {fixated}; \
             (c) median remnant {median} (<= {}); (d) remnant degree <= {ref_deg:.2} in {deg_ok:.3} (>= 0.95). \
             p*gap = {:.2}: p*gap >= 10 is unattainable here since p*gap <= pn/2 = {:.2}",
            0.05 * n,
            p * gap,
            p * n / 2.0
        ),
    )
}

fn comparable(res: &EnsembleResult) -> Vec<(Winner, Option<usize>, Option<u8>, Option<usize>, bool, Vec<usize>)> {
    res.cells[0]
        .outcomes
        .iter()
        .map(|o| (o.winner, o.t_win, o.period, o.t_star, o.truncated, o.blue_counts.clone()))
        .collect()
}

fn lazy(power: &EnsembleResult) -> Outcome {
    let cfg = preset("lazy", SEED).unwrap();
    let res = run_ensemble(&cfg).unwrap();
    let c = &res.cells[0];
    let (p_ac, p_up) = match c.cell.variant {
        VariantSpec::Lazy { p_ac, p_up } => (p_ac, p_up),
        VariantSpec::Deterministic => unreachable!(),
    };
    let budget = (40.0 * (c.cell.n as f64).ln() / (p_up * p_ac)).ceil() as usize;
    let frac = c.fraction(c.red_within(budget));
    let strength = p_up * p_ac * p_ac * c.cell.p * c.cell.gap().unwrap();

    let mut sync = power.config.clone();
    sync.variant = VariantSpec::Lazy { p_ac: 1.0, p_up: 1.0 };
    let same = comparable(&run_ensemble(&sync).unwrap()) == comparable(power);
    outcome(
        frac >= 0.9 && same && c.cell.max_days == budget,
        format!(
            "p_up p_ac^2 p gap = {strength}; Red within {budget} days in {frac:.4} of {} trials (>= 0.9); \
             p_ac = p_up = 1 reproduces the deterministic trajectories: {same}",
            c.trials
        ),
    )
}

fn csv_bytes(cfg: &ExperimentConfig, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let res = run_ensemble_threads(cfg, threads).unwrap();
    let (mut csv, mut json) = (Vec::new(), Vec::new());
    write_csv(&res, &mut csv).unwrap();
    write_json(&res, &mut json).unwrap();
    (csv, json)
}

fn reproducibility() -> Outcome {
    let mut configs = Vec::new();
    let mut a = ExperimentConfig::new(500, 0.02, Scheme::RandomHalf, 200, 42);
    a.sweep.p = vec![0.02, 0.1];
    a.diagnostics = true;
    configs.push(a);
    let mut b = ExperimentConfig::new(300, 0.1, Scheme::FixedGap { red_count: 160 }, 100, 43);
    b.variant = VariantSpec::Lazy { p_ac: 0.5, p_up: 0.7 };
    configs.push(b);
    let mut c = ExperimentConfig::new(400, 0.05, Scheme::DefectorModel { delta: 5 }, 100, 44);
    c.sweep.delta = vec![2.0, 5.0];
    configs.push(c);
    configs.push(ExperimentConfig::new(200, 0.03, Scheme::RandomBiased { p_r: 0.55 }, 150, 45));
    let mut identical = 0;
    for cfg in &configs {
        if csv_bytes(cfg, 1) == csv_bytes(cfg, 8) {
            identical += 1;
        }
    }
    outcome(identical == configs.len(), format!("{identical}/{} configs byte-identical (CSV and JSON) at 1 vs 8 threads", configs.len()))
}

fn performance() -> Outcome {
    let n = 100_000;
    let p = 2.0 * (n as f64).ln() / n as f64;
    let g = sample_gnp(n, p, &mut derive_stream(SEED, 0)).unwrap();
    let mut rng = derive_stream(SEED, 1);
    let mut c = apply_scheme(&Scheme::RandomHalf, n, &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    let mut days = 0;
    while c.unanimous().is_none() && days < 50 {
        let t = Instant::now();
        let next = majority_step(&g, &c);
        worst = worst.max(t.elapsed().as_secs_f64());
        days += 1;
        if next == c {
            break;
        }
        c = next;
    }
    let t = Instant::now();
    let traj = run(&g, &apply_scheme(&Scheme::RandomHalf, n, &mut derive_stream(SEED, 1)).unwrap(), Variant::Deterministic, default_max_days(n, p, VariantSpec::Deterministic).unwrap(), &mut rng).unwrap();
    let per_day = t.elapsed().as_secs_f64() / traj.days().max(1) as f64;

    let start = Instant::now();
    let res = run_ensemble(&ExperimentConfig::new(n, p, Scheme::RandomHalf, 100, SEED)).unwrap();
    let ens = start.elapsed().as_secs_f64();
    outcome(
        worst < 1.0 && per_day < 1.0 && ens < 60.0 && res.cells[0].trials == 100,
        format!(
            "n=1e5, p={p:.3e}, {} edges: slowest step {:.4}s, run {:.4}s/day over {} days; 100-trial ensemble {ens:.1}s (< 60s)",
            g.edge_count(),
            worst,
            per_day,
            traj.days()
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("criterion {id:>2} {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    let start = Instant::now();
    let power = run_ensemble(&preset("power_of_few", SEED).unwrap()).unwrap();
    report(1, "power of few", power_of_few(&power, start.elapsed()));
    report(2, "exact oracle equivalence", oracle_equivalence());
    report(3, "day-one moment bounds", day1_moments());
    report(4, "period at most two", period_two());
    report(5, "dominance suites", dominance());
    report(6, "spectral shrink", spectral_shrink());
    report(7, "norm concentration", norm_ratios());
    report(8, "sub-connectivity", subconnectivity());
    report(9, "lazy robustness", lazy(&power));
    report(10, "thread-count reproducibility", reproducibility());
    report(11, "performance", performance());

    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

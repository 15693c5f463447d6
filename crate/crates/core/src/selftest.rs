//! Fast invariant checks run by `majlab selftest`. Each check is small
//! enough that the whole suite finishes in well under a second.

use serde::Serialize;

use crate::analytics::{berry_esseen_bound, c_day1, d_c, phi, theorem1_failure_bound};
use crate::coloring::Coloring;
use crate::dynamics::{majority_step, run, Variant, Winner};
use crate::experiments::{run_ensemble_threads, wilson_interval, write_csv, ExperimentConfig, Scheme};
use crate::graph::{sample_gnp_with, Graph, Layout};
use crate::oracle::exact_win_prob;
use crate::rng::derive_stream;
use crate::spectral::{centered_opnorm, DEFAULT_TOL};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> std::result::Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> std::result::Result<(), String> {
    ensure((a - b).abs() <= tol, format!("{what}: got {a}, expected {b}"))
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("rng_streams_reproducible", || {
            let draw = |i| {
                let mut r = derive_stream(7, i);
                (0..4).map(|_| r.next_u64()).collect::<Vec<_>>()
            };
            let (a, b) = (draw(3), draw(3));
            let c = draw(4)[0];
            ensure(a == b && a[0] != c, "stream derivation not deterministic or streams collide")?;
            Ok(format!("{:#x}", a[0]))
        }),
        check("gnp_layouts_agree", || {
            for (n, p) in [(30, 0.1), (64, 0.5), (100, 0.03)] {
                let csr = sample_gnp_with(n, p, &mut derive_stream(1, n as u64), Layout::Csr).map_err(|e| e.to_string())?;
                let dense = csr.to_layout(Layout::Dense);
                csr.validate().map_err(|e| e.to_string())?;
                ensure(csr.edges().eq(dense.edges()), format!("layout mismatch at n={n}"))?;
            }
            Ok("3 graphs".into())
        }),
        check("complete_graph_one_day", || {
            let g = Graph::complete(5, Layout::Csr).map_err(|e| e.to_string())?;
            let t = run(&g, &Coloring::red_prefix(5, 3), Variant::Deterministic, 10, &mut derive_stream(0, 0))
                .map_err(|e| e.to_string())?;
            ensure(t.winner == Winner::Red && t.t_win == Some(1), format!("{:?} {:?}", t.winner, t.t_win))?;
            Ok("K5 red in 1 day".into())
        }),
        check("two_step_color_symmetry", || {
            let g = sample_gnp_with(40, 0.2, &mut derive_stream(2, 0), Layout::Csr).map_err(|e| e.to_string())?;
            let c = Coloring::red_prefix(40, 23);
            let a = majority_step(&g, &majority_step(&g, &c));
            let b = majority_step(&g, &majority_step(&g, &c.swapped()));
            ensure(a.swapped() == b, "swapping colors does not commute with the step")?;
            Ok("ok".into())
        }),
        check("phi_reference_values", || {
            close(phi(1.9), 0.971_283_440_183_998, 1e-12, "phi(1.9)")?;
            close(phi(0.7) + phi(-0.7), 1.0, 1e-15, "phi symmetry")?;
            close(d_c(10.0), phi(1.9) - 0.5 - 0.056, 1e-15, "d_c(10)")?;
            let c = c_day1(10.0, 0.21).map_err(|e| e.to_string())?;
            ensure(c < 14.0, format!("c_day1(10, .21) = {c}"))?;
            close(berry_esseen_bound(100.0, 0.5), 0.056, 1e-15, "berry_esseen_bound")?;
            Ok(format!("C(10,.21) = {c:.4}"))
        }),
        check("theorem_bound_terms", || {
            let r = theorem1_failure_bound(1e6, 0.5, 10.0, 1.0);
            close(r.value("day1_term").unwrap_or(f64::NAN), 0.28, 1e-12, "day1_term")?;
            close(r.value("step3_term").unwrap_or(f64::NAN), 0.002, 1e-12, "step3_term")?;
            Ok("0.28, 0.002".into())
        }),
        check("oracle_probabilities_sum_to_one", || {
            for p in [0.2, 0.5, 0.8] {
                let w = exact_win_prob(4, p, &Coloring::red_prefix(4, 3), 16).map_err(|e| e.to_string())?;
                close(w.red + w.blue + w.none, 1.0, 1e-12, "total probability")?;
            }
            Ok("n = 4".into())
        }),
        check("triangle_centered_norm", || {
            // A - (2/3) J on K3 has eigenvalues 0, -1, -1.
            let k3 = Graph::complete(3, Layout::Csr).map_err(|e| e.to_string())?;
            let e = centered_opnorm(&k3, 2.0 / 3.0, DEFAULT_TOL, 1000).map_err(|e| e.to_string())?;
            close(e.norm, 1.0, 1e-6, "norm")?;
            Ok(format!("{:.9}", e.norm))
        }),
        check("wilson_interval", || {
            let (lo, hi) = wilson_interval(90, 100, 1.96).map_err(|e| e.to_string())?;
            close(lo, 0.825_633, 1e-5, "lo")?;
            close(hi, 0.944_771, 1e-5, "hi")?;
            Ok(format!("({lo:.4}, {hi:.4})"))
        }),
        check("ensemble_thread_invariance", || {
            let cfg = ExperimentConfig::new(60, 0.15, Scheme::RandomHalf, 24, 11);
            let mut out = Vec::new();
            for threads in [1, 3] {
                let r = run_ensemble_threads(&cfg, threads).map_err(|e| e.to_string())?;
                let mut buf = Vec::new();
                write_csv(&r, &mut buf).map_err(|e| e.to_string())?;
                out.push(buf);
            }
            ensure(out[0] == out[1], "CSV differs between 1 and 3 threads")?;
            Ok(format!("{} bytes", out[0].len()))
        }),
    ]
}

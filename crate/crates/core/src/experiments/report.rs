use std::io::Write;

use serde::Serialize;

use super::config::VariantSpec;
use super::ensemble::{mean_var, CellResult, EnsembleResult};
use super::wilson_interval;
use crate::analytics::{d_c, day1_bound, isolated_moments, step2_fail_bound, BoundReport};
use crate::error::Result;

pub const CSV_HEADER: &str = "n,p,delta,p_r,p_ac,p_up,variant,trials,metric,value,ci_lo,ci_hi,seed";

/// One `(cell, metric)` row. Missing values serialize as empty fields.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub n: usize,
    pub p: f64,
    pub delta: Option<f64>,
    pub p_r: Option<f64>,
    pub p_ac: Option<f64>,
    pub p_up: Option<f64>,
    pub variant: &'static str,
    pub trials: usize,
    pub metric: String,
    pub value: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub seed: u64,
}

struct RowSink<'a> {
    cell: &'a CellResult,
    rows: Vec<Row>,
}

impl<'a> RowSink<'a> {
    fn new(cell: &'a CellResult) -> Self {
        Self { cell, rows: Vec::new() }
    }

    fn push(&mut self, metric: impl Into<String>, value: f64, ci: Option<(f64, f64)>) {
        let c = &self.cell.cell;
        let (p_ac, p_up) = match c.variant {
            VariantSpec::Deterministic => (None, None),
            VariantSpec::Lazy { p_ac, p_up } => (Some(p_ac), Some(p_up)),
        };
        self.rows.push(Row {
            n: c.n,
            p: c.p,
            delta: c.gap(),
            p_r: c.scheme.p_r(),
            p_ac,
            p_up,
            variant: c.variant.label(),
            trials: self.cell.trials,
            metric: metric.into(),
            value,
            ci_lo: ci.map(|x| x.0),
            ci_hi: ci.map(|x| x.1),
            seed: self.cell.master_seed,
        });
    }

    fn proportion(&mut self, metric: &str, count: usize, trials: usize) {
        if trials > 0 {
            let ci = wilson_interval(count, trials, 1.96).expect("count <= trials");
            self.push(metric, count as f64 / trials as f64, Some(ci));
        }
    }

    fn finite(&mut self, metric: &str, value: f64) {
        if value.is_finite() {
            self.push(metric, value, None);
        }
    }
}

/// Outcome summary rows for one cell.
pub fn cell_rows(r: &CellResult) -> Vec<Row> {
    let mut s = RowSink::new(r);
    s.proportion("red_win_frac", r.red_wins, r.trials);
    s.proportion("blue_win_frac", r.blue_wins, r.trials);
    s.proportion("none_frac", r.none, r.trials);
    s.push("truncated", r.truncated as f64, None);
    if let Some(m) = r.mean_win_day {
        s.push("mean_win_day", m, None);
    }
    if let Some(m) = r.max_win_day {
        s.push("max_win_day", m as f64, None);
    }
    for (d, k) in &r.red_win_days {
        s.push(format!("red_wins_on_day_{d}"), *k as f64, None);
    }
    for (d, k) in &r.blue_win_days {
        s.push(format!("blue_wins_on_day_{d}"), *k as f64, None);
    }
    let b1_count = r.outcomes.iter().filter(|o| o.b1.is_some()).count();
    if r.b1_mean.is_finite() {
        let se = (r.b1_var / b1_count as f64).sqrt();
        s.push("b1_mean", r.b1_mean, Some((r.b1_mean - 1.96 * se, r.b1_mean + 1.96 * se)));
        s.push("b1_var", r.b1_var, None);
    }
    bound_rows(&mut s, &r.bound);
    s.rows
}

fn bound_rows(s: &mut RowSink, b: &BoundReport) {
    for (name, t) in &b.terms {
        if t.explicit {
            s.finite(&format!("bound.{name}"), t.value);
        }
    }
}

/// Measured day-one/day-two and remnant statistics next to the matching
/// closed-form bounds. Day-one bounds use `c = min(p gap, sqrt(p(1-p)n))`
/// and `D = D_c / 2`; they are emitted only for a positive fixed gap.
pub fn bound_vs_measured(r: &CellResult) -> Vec<Row> {
    let mut s = RowSink::new(r);
    let cell = &r.cell;
    let n = cell.n as f64;
    let p = cell.p;
    let pn = p * n;

    let b1: Vec<f64> = r.outcomes.iter().filter_map(|o| o.b1.map(|x| x as f64)).collect();
    let (m1, v1) = mean_var(&b1);
    if !b1.is_empty() {
        let se = (v1 / b1.len() as f64).sqrt();
        s.push("measured_b1_mean", m1, Some((m1 - 1.96 * se, m1 + 1.96 * se)));
        s.push("measured_b1_var", v1, None);
    }
    s.push("bound_b1_var_7n_over_12", 7.0 * n / 12.0, None);

    if let Some(gap) = cell.gap().filter(|&g| g > 0.0) {
        let c = (p * gap).min((p * (1.0 - p) * n).sqrt());
        if c > 0.0 {
            let dc = d_c(c);
            s.push("param_c", c, None);
            s.push("param_d_c", dc, None);
            s.push("bound_b1_mean", n / 2.0 - dc * n.min(gap * pn.sqrt()), None);
            if dc > 0.0 {
                let d = dc / 2.0;
                if let Ok(day1) = day1_bound(n, p, gap, c, d) {
                    s.push("bound_day1_threshold", day1.threshold, None);
                    s.push("bound_day1_fail", day1.fail_prob, None);
                    let above = b1.iter().filter(|&&x| x > day1.threshold).count();
                    s.proportion("measured_pr_b1_gt_threshold", above, b1.len());
                }
                let a = d * pn.sqrt().min(p * gap);
                s.push("bound_step2_fail", step2_fail_bound(n, p, a, 0.25), None);
            }
        }
    }
    let b2: Vec<usize> = r.outcomes.iter().filter_map(|o| o.b2).collect();
    let over = b2.iter().filter(|&&x| x as f64 > 0.25 * n).count();
    s.proportion("measured_pr_b2_gt_quarter_n", over, b2.len());

    let fixated = r.outcomes.iter().filter(|o| !o.truncated && matches!(o.period, Some(1 | 2))).count();
    s.proportion("fixated_frac", fixated, r.trials);
    let mut remnants: Vec<usize> = r.outcomes.iter().map(|o| o.remnant).collect();
    remnants.sort_unstable();
    s.push("median_remnant", median(&remnants), None);
    s.push("max_remnant", *remnants.last().unwrap_or(&0) as f64, None);
    let degs: Vec<f64> = r.outcomes.iter().filter_map(|o| o.remnant_avg_degree).collect();
    if !degs.is_empty() {
        s.push("mean_remnant_avg_degree", degs.iter().sum::<f64>() / degs.len() as f64, None);
        s.push("max_remnant_avg_degree", degs.iter().cloned().fold(0.0, f64::max), None);
    }
    let ref_deg = 3.0 * pn.sqrt();
    s.push("ref_3_sqrt_pn", ref_deg, None);
    let within = r
        .outcomes
        .iter()
        .filter(|o| o.remnant_avg_degree.map_or(true, |d| d <= ref_deg))
        .count();
    s.proportion("remnant_avg_degree_le_3_sqrt_pn_frac", within, r.trials);
    let iso = r.outcomes.iter().filter(|o| o.isolated_initial_blue).count();
    s.proportion("isolated_initial_blue_frac", iso, r.trials);
    if let Some(o) = r.outcomes.first() {
        if !cell.scheme.uses_rng() {
            if let Ok((mean, var)) = isolated_moments(o.initial_blue as u64, cell.n as u64, p) {
                s.push("expected_isolated_initial_blue", mean, None);
                s.push("variance_isolated_initial_blue", var, None);
            }
        }
    }
    s.rows
}

fn median(sorted: &[usize]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => sorted[k / 2] as f64,
        k => (sorted[k / 2 - 1] + sorted[k / 2]) as f64 / 2.0,
    }
}

fn all_rows(res: &EnsembleResult) -> Vec<Row> {
    let mut rows = Vec::new();
    for c in &res.cells {
        rows.extend(cell_rows(c));
        if res.config.diagnostics {
            rows.extend(bound_vs_measured(c));
        }
    }
    rows
}

/// CSV with a header row and LF line endings.
pub fn write_csv<W: Write>(res: &EnsembleResult, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_writer(w);
    for row in all_rows(res) {
        wtr.serialize(row)?;
    }
    if res.cells.is_empty() {
        wtr.write_record(CSV_HEADER.split(','))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CellBound<'a> {
    n: usize,
    p: f64,
    delta: Option<f64>,
    p_r: Option<f64>,
    variant: &'static str,
    report: &'a BoundReport,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    rows: Vec<Row>,
    bounds: Vec<CellBound<'a>>,
}

/// JSON object `{rows, bounds}`.
pub fn write_json<W: Write>(res: &EnsembleResult, w: W) -> Result<()> {
    let report = JsonReport {
        rows: all_rows(res),
        bounds: res
            .cells
            .iter()
            .map(|c| CellBound {
                n: c.cell.n,
                p: c.cell.p,
                delta: c.cell.gap(),
                p_r: c.cell.scheme.p_r(),
                variant: c.cell.variant.label(),
                report: &c.bound,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(w, &report)?;
    Ok(())
}

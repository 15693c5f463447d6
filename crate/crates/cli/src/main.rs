use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use majlab::analytics::{lazy_failure_bound, theorem1_failure_bound};
use majlab::experiments::{
    apply_scheme, default_max_days, run_ensemble_threads, write_csv, write_json, ConfigMap, ExperimentConfig,
    PRESET_NAMES,
};
use majlab::oracle::{exact_day1_distribution, exact_lazy_day1_distribution, exact_win_prob};
use majlab::spectral::{min_opnorm, norm_concentration, shrink_check, DEFAULT_TOL, default_max_iter};
use majlab::{derive_stream, run_with, sample_gnp, Coloring, RunOptions};

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "majlab", version, about = "Majority dynamics on G(n, p): simulation, ensembles and bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trial and print its trajectory.
    Simulate(Opts),
    /// Run a Monte Carlo ensemble from flags and/or a config file.
    Ensemble(Opts),
    /// Run a named experiment.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Evaluate the closed-form failure bounds.
    Bounds(Opts),
    /// Operator-norm concentration or the one-day shrink inequality.
    Spectral {
        #[arg(long, value_enum, default_value_t = SpectralMode::Concentration)]
        mode: SpectralMode,
        /// Threshold fraction b for the shrink inequality.
        #[arg(long, default_value_t = 0.25)]
        b: f64,
        #[command(flatten)]
        opts: Opts,
    },
    /// Exact small-graph probabilities by enumeration.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectralMode {
    Concentration,
    Shrink,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Win,
    Day1,
    LazyDay1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Default)]
struct Opts {
    /// `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Initial gap: |Red| = n/2 + delta.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Initial Red count (vertices 0..red).
    #[arg(long)]
    red: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "p-r")]
    p_r: Option<f64>,
    #[arg(long = "p-ac")]
    p_ac: Option<f64>,
    #[arg(long = "p-up")]
    p_up: Option<f64>,
    /// fixed_gap, random_half, random_biased or defector.
    #[arg(long)]
    scheme: Option<String>,
    /// deterministic or lazy.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; defaults to $MAJLAB_SEED, then 1.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-days")]
    max_days: Option<usize>,
    /// Also emit measured-vs-bound diagnostic rows.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Config file merged with flags.
struct Settings {
    map: ConfigMap,
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Settings {
    fn load(o: &Opts) -> Result<Self> {
        let mut map = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ConfigMap::parse(&text)?
            }
            None => ConfigMap::default(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.set(k, v);
            }
        };
        put("n", o.n.map(|x| x.to_string()));
        put("p", o.p.map(|x| x.to_string()));
        put("delta", o.delta.map(|x| x.to_string()));
        put("red", o.red.map(|x| x.to_string()));
        put("lambda", o.lambda.map(|x| x.to_string()));
        put("p_r", o.p_r.map(|x| x.to_string()));
        put("p_ac", o.p_ac.map(|x| x.to_string()));
        put("p_up", o.p_up.map(|x| x.to_string()));
        put("scheme", o.scheme.clone());
        put("variant", o.variant.clone());
        put("trials", o.trials.map(|x| x.to_string()));
        put("seed", o.seed.map(|x| x.to_string()));
        put("max_days", o.max_days.map(|x| x.to_string()));
        put("threads", o.threads.map(|x| x.to_string()));
        if o.diagnostics {
            put("diagnostics", Some("true".into()));
        }
        let format = match (o.format, map.get("format")) {
            (Some(f), _) => Some(f),
            (None, Some(s)) => Some(Format::from_str(s, true).map_err(|_| anyhow!("format = `{s}`: expected csv or json"))?),
            (None, None) => None,
        };
        let out = o.out.clone().or_else(|| map.get("out").map(PathBuf::from));
        Ok(Self { map, out, format })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("{key} = `{v}`: {e}")))
            .transpose()
    }

    fn need<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| anyhow!("--{} is required", key.replace('_', "-")))
    }

    fn seed(&self) -> Result<u64> {
        Ok(self.get("seed")?.unwrap_or(default_seed()?))
    }

    fn threads(&self) -> Result<usize> {
        Ok(self.get("threads")?.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(self.map.to_config(default_seed()?)?)
    }

    /// Writes to `--out` through a temporary file in the same directory, or
    /// to stdout.
    fn emit(&self, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match &self.out {
            Some(path) => write_atomic(path, write),
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)?;
                lock.flush()?;
                Ok(())
            }
        }
    }
}

fn default_seed() -> Result<u64> {
    match std::env::var("MAJLAB_SEED") {
        Ok(s) => s.trim().parse().map_err(|e| anyhow!("MAJLAB_SEED = `{s}`: {e}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn json_out(w: &mut dyn Write, v: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v)?;
    writeln!(w)?;
    Ok(())
}

fn simulate(o: &Opts) -> Result<()> {
    let s = Settings::load(o)?;
    let mut cfg = s.experiment()?;
    cfg.trials = 1;
    cfg.validate()?;
    let max_days = match cfg.max_days {
        Some(m) => m,
        None => default_max_days(cfg.n, cfg.p, cfg.variant)?,
    };
    // Same streams as trial 0 of an ensemble with this seed.
    let g = sample_gnp(cfg.n, cfg.p, &mut derive_stream(cfg.master_seed, 0))?;
    let mut rng = derive_stream(cfg.master_seed, 1);
    let c0 = apply_scheme(&cfg.scheme, cfg.n, &mut rng)?;
    let traj = run_with(&g, &c0, cfg.variant.to_variant()?, max_days, &mut rng, RunOptions::default())?;
    s.emit(|w| match s.format.unwrap_or(Format::Json) {
        Format::Json => json_out(w, &traj.to_json()),
        Format::Csv => {
            writeln!(w, "day,blue_count")?;
            for (d, b) in traj.blue_counts.iter().enumerate() {
                writeln!(w, "{d},{b}")?;
            }
            Ok(())
        }
    })
}

fn ensemble(s: Settings) -> Result<()> {
    let cfg = s.experiment()?;
    let res = run_ensemble_threads(&cfg, s.threads()?)?;
    s.emit(|w| {
        match s.format.unwrap_or(Format::Csv) {
            Format::Csv => write_csv(&res, w)?,
            Format::Json => {
                write_json(&res, &mut *w)?;
                writeln!(w)?;
            }
        }
        Ok(())
    })
}

fn bounds(o: &Opts) -> Result<()> {
    let s = Settings::load(o)?;
    let n: f64 = s.need::<f64>("n")?;
    let p: f64 = s.need("p")?;
    let delta: f64 = s.need("delta")?;
    let lambda: f64 = s.get("lambda")?.unwrap_or(1.0);
    let report = match (s.get::<f64>("p_ac")?, s.get::<f64>("p_up")?) {
        (None, None) => theorem1_failure_bound(n, p, delta, lambda),
        (ac, up) => lazy_failure_bound(n, p, delta, lambda, ac.unwrap_or(1.0), up.unwrap_or(1.0))?,
    };
    s.emit(|w| match s.format.unwrap_or(Format::Json) {
        Format::Json => json_out(w, &serde_json::to_value(&report)?),
        Format::Csv => {
            writeln!(w, "kind,name,value,explicit")?;
            for (name, t) in &report.terms {
                writeln!(w, "term,{name},{},{}", t.value, t.explicit)?;
            }
            for (name, v) in &report.flags {
                writeln!(w, "flag,\"{name}\",{v},")?;
            }
            Ok(())
        }
    })
}

fn spectral(mode: SpectralMode, b: f64, o: &Opts) -> Result<()> {
    let s = Settings::load(o)?;
    let n: usize = s.need("n")?;
    let p: f64 = s.need("p")?;
    let seed = s.seed()?;
    let threads = s.threads()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    match mode {
        SpectralMode::Concentration => {
            let samples = s.get("trials")?.unwrap_or(20);
            let ratios = pool.install(|| norm_concentration(n, p, samples, seed, DEFAULT_TOL))?;
            s.emit(|w| match s.format.unwrap_or(Format::Json) {
                Format::Json => json_out(
                    w,
                    &json!({
                        "n": n,
                        "p": p,
                        "seed": seed,
                        "ratios": ratios,
                        "max_ratio": ratios.iter().cloned().fold(0.0, f64::max),
                    }),
                ),
                Format::Csv => {
                    writeln!(w, "sample,ratio")?;
                    for (i, r) in ratios.iter().enumerate() {
                        writeln!(w, "{i},{r}")?;
                    }
                    Ok(())
                }
            })
        }
        SpectralMode::Shrink => {
            let mut cfg = s.experiment()?;
            if s.get::<usize>("trials")?.is_none() {
                cfg.trials = 10;
            }
            cfg.validate()?;
            let max_days = match cfg.max_days {
                Some(m) => m,
                None => default_max_days(n, p, cfg.variant)?,
            };
            let mut rows = Vec::new();
            for i in 0..cfg.trials {
                let g = sample_gnp(n, p, &mut derive_stream(cfg.master_seed, 2 * i as u64))?;
                let mut rng = derive_stream(cfg.master_seed, 2 * i as u64 + 1);
                let c0 = apply_scheme(&cfg.scheme, n, &mut rng)?;
                let opts = RunOptions { keep_snapshots: true };
                let traj = run_with(&g, &c0, cfg.variant.to_variant()?, max_days, &mut rng, opts)?;
                let density = if n > 1 { 2.0 * g.edge_count() as f64 / (n * (n - 1)) as f64 } else { p };
                let (x, norm) = min_opnorm(&g, &[p, density], DEFAULT_TOL, default_max_iter(n))?;
                let report = shrink_check(&g, &traj, b, norm.norm)?;
                rows.push(json!({
                    "trial": i,
                    "x": x,
                    "norm": norm.norm,
                    "all_pass": report.all_pass(),
                    "report": report,
                }));
            }
            s.emit(|w| json_out(w, &json!({ "n": n, "p": p, "b": b, "seed": cfg.master_seed, "trials": rows })))
        }
    }
}

fn initial_coloring(s: &Settings, n: usize) -> Result<Coloring> {
    let red: usize = match (s.get::<usize>("red")?, s.get::<f64>("delta")?) {
        (Some(r), _) => r,
        (None, Some(d)) => {
            let r = n as f64 / 2.0 + d;
            if r.fract() != 0.0 || !(0.0..=n as f64).contains(&r) {
                bail!("n/2 + delta = {r} is not a valid Red count");
            }
            r as usize
        }
        (None, None) => bail!("--red or --delta is required"),
    };
    if red > n {
        bail!("red = {red} exceeds n = {n}");
    }
    Ok(Coloring::red_prefix(n, red))
}

fn oracle(kind: OracleKind, o: &Opts) -> Result<()> {
    let s = Settings::load(o)?;
    let n: usize = s.need("n")?;
    let p: f64 = s.need("p")?;
    let c0 = initial_coloring(&s, n)?;
    let value = match kind {
        OracleKind::Win => {
            let max_days = s.get("max_days")?.unwrap_or(4 * n.max(1));
            let w = exact_win_prob(n, p, &c0, max_days)?;
            json!({ "n": n, "p": p, "red_count": c0.red_count(), "max_days": max_days, "win": w })
        }
        OracleKind::Day1 => {
            let d = exact_day1_distribution(n, p, &c0)?;
            json!({ "n": n, "p": p, "red_count": c0.red_count(), "blue_day1_pmf": d })
        }
        OracleKind::LazyDay1 => {
            let p_ac = s.get("p_ac")?.unwrap_or(1.0);
            let p_up = s.get("p_up")?.unwrap_or(1.0);
            let d = exact_lazy_day1_distribution(n, p, p_ac, p_up, &c0)?;
            json!({ "n": n, "p": p, "p_ac": p_ac, "p_up": p_up, "red_count": c0.red_count(), "blue_day1_pmf": d })
        }
    };
    s.emit(|w| json_out(w, &value))
}

fn selftest() -> Result<bool> {
    let checks = majlab::selftest::run_all();
    let mut ok = true;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Simulate(o) => simulate(&o)?,
        Cmd::Ensemble(o) => ensemble(Settings::load(&o)?)?,
        Cmd::Preset { name, opts } => {
            let mut s = Settings::load(&opts)?;
            s.map.set("preset", name);
            ensemble(s)?
        }
        Cmd::Bounds(o) => bounds(&o)?,
        Cmd::Spectral { mode, b, opts } => spectral(mode, b, &opts)?,
        Cmd::Oracle { kind, opts } => oracle(kind, &opts)?,
        Cmd::Selftest => {
            if !selftest()? {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::collections::BTreeMap;

use serde::Serialize;

use super::Scheme;
use crate::dynamics::{LazyParams, Variant};
use crate::error::{check_probability, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum VariantSpec {
    Deterministic,
    Lazy { p_ac: f64, p_up: f64 },
}

impl VariantSpec {
    pub fn to_variant(self) -> Result<Variant> {
        Ok(match self {
            VariantSpec::Deterministic => Variant::Deterministic,
            VariantSpec::Lazy { p_ac, p_up } => Variant::Lazy(LazyParams::new(p_ac, p_up)?),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            VariantSpec::Deterministic => "deterministic",
            VariantSpec::Lazy { .. } => "lazy",
        }
    }
}

/// Optional grids. Every combination of the listed values becomes one
/// cell; an empty list means "use the base value".
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Sweep {
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    /// Red-minus-half gaps for [`Scheme::FixedGap`], or defector counts for
    /// [`Scheme::DefectorModel`].
    pub delta: Vec<f64>,
    pub p_r: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub n: usize,
    pub p: f64,
    pub scheme: Scheme,
    pub variant: VariantSpec,
    pub trials: usize,
    /// `None` selects [`default_max_days`] per cell.
    pub max_days: Option<usize>,
    pub master_seed: u64,
    pub sweep: Sweep,
    /// Keep every day's coloring (memory heavy).
    pub snapshots: bool,
    /// Emit bound-vs-measurement rows.
    pub diagnostics: bool,
}

impl ExperimentConfig {
    pub fn new(n: usize, p: f64, scheme: Scheme, trials: usize, master_seed: u64) -> Self {
        Self {
            name: "custom".into(),
            n,
            p,
            scheme,
            variant: VariantSpec::Deterministic,
            trials,
            max_days: None,
            master_seed,
            sweep: Sweep::default(),
            snapshots: false,
            diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.max_days == Some(0) {
            return Err(Error::Config("max_days must be at least 1".into()));
        }
        self.variant.to_variant()?;
        if !self.sweep.delta.is_empty()
            && !matches!(self.scheme, Scheme::FixedGap { .. } | Scheme::DefectorModel { .. })
        {
            return Err(Error::Config("a delta sweep needs a fixed-gap or defector scheme".into()));
        }
        if !self.sweep.p_r.is_empty() && !matches!(self.scheme, Scheme::RandomBiased { .. } | Scheme::RandomHalf) {
            return Err(Error::Config("a p_r sweep needs a random scheme".into()));
        }
        for &p in self.sweep.p.iter().chain(std::iter::once(&self.p)) {
            check_probability("p", p)?;
        }
        for &p_r in &self.sweep.p_r {
            check_probability("p_r", p_r)?;
        }
        for &n in self.sweep.n.iter().chain(std::iter::once(&self.n)) {
            if n == 0 {
                return Err(Error::Config("n must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Default day budget: synchronous `4 ceil(ln n / ln max(pn, 2)) + 8`,
/// lazy `ceil(40 ln n / (p_up p_ac))`.
pub fn default_max_days(n: usize, p: f64, variant: VariantSpec) -> Result<usize> {
    let ln_n = (n.max(2) as f64).ln();
    match variant {
        VariantSpec::Deterministic => {
            let base = (p * n as f64).max(2.0).ln();
            Ok(4 * (ln_n / base).ceil() as usize + 8)
        }
        VariantSpec::Lazy { p_ac, p_up } => {
            let rate = p_ac * p_up;
            if rate <= 0.0 {
                return Err(Error::Config("lazy runs with p_ac * p_up = 0 need an explicit max_days".into()));
            }
            Ok((40.0 * ln_n / rate).ceil() as usize)
        }
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "power_of_few",
    "random_half",
    "biased",
    "subconnectivity",
    "lazy",
    "conjecture_sweep",
];

/// Named desk-scale experiments.
///
/// | name | cells |
/// |---|---|
/// | `power_of_few` | n = 2000, p = 1/2, 1005 Red, 2000 trials, 16 days |
/// | `random_half` | n = 2000, p = L / sqrt(n) for L in {1, 2, 4, 8}, coin-flip coloring, 500 trials |
/// | `biased` | n = 2000, p = 2 ln n / n, p_r = 1/2 + k / (pn) for k in {1/2, 1, 2, 4}, 500 trials |
/// | `subconnectivity` | n = 5000, p = (1 - 1/2) ln n / n, 4750 Red, 500 trials |
/// | `lazy` | n = 2000, p = 1/2, p_ac = p_up = 1/2, 1160 Red, 500 trials |
/// | `conjecture_sweep` | n = 1000, p in {0.1, 0.25, 0.5}, gap in {1, 2, 3, 4, 6, 8, 12, 16}, 400 trials |
///
/// The sub-connectivity preset cannot satisfy `p * gap >= 10` at this size
/// (`p * n / 2 < 2.2`); it uses a 250-vertex Blue minority instead.
pub fn preset(name: &str, master_seed: u64) -> Result<ExperimentConfig> {
    let mut cfg = match name {
        "power_of_few" => {
            let mut c = ExperimentConfig::new(2000, 0.5, Scheme::FixedGap { red_count: 1005 }, 2000, master_seed);
            c.max_days = Some(16);
            c
        }
        "random_half" => {
            let n = 2000usize;
            let mut c = ExperimentConfig::new(n, 1.0 / (n as f64).sqrt(), Scheme::RandomHalf, 500, master_seed);
            c.sweep.p = [1.0, 2.0, 4.0, 8.0].iter().map(|l| l / (n as f64).sqrt()).collect();
            c
        }
        "biased" => {
            let n = 2000usize;
            let p = 2.0 * (n as f64).ln() / n as f64;
            let pn = p * n as f64;
            let mut c = ExperimentConfig::new(n, p, Scheme::RandomBiased { p_r: 0.5 }, 500, master_seed);
            c.sweep.p_r = [0.5, 1.0, 2.0, 4.0].iter().map(|k| 0.5 + k / pn).collect();
            c
        }
        "subconnectivity" => {
            let n = 5000usize;
            let lambda = 0.5;
            let p = (1.0 - lambda) * (n as f64).ln() / n as f64;
            let mut c = ExperimentConfig::new(n, p, Scheme::FixedGap { red_count: 4750 }, 500, master_seed);
            c.max_days = Some(1000);
            c.diagnostics = true;
            c
        }
        "lazy" => {
            let mut c = ExperimentConfig::new(2000, 0.5, Scheme::FixedGap { red_count: 1160 }, 500, master_seed);
            c.variant = VariantSpec::Lazy { p_ac: 0.5, p_up: 0.5 };
            c
        }
        "conjecture_sweep" => {
            let mut c = ExperimentConfig::new(1000, 0.5, Scheme::FixedGap { red_count: 501 }, 400, master_seed);
            c.sweep.p = vec![0.1, 0.25, 0.5];
            c.sweep.delta = vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0];
            c
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    cfg.name = name.to_string();
    Ok(cfg)
}

/// Flat `key = value` settings, as read from a config file or flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(pub BTreeMap<String, String>);

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment. Keys may use `-`
    /// or `_` interchangeably.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got `{line}`"),
            })?;
            map.insert(normalize_key(k.trim()), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(normalize_key(key), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = `{v}`: {e}")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| Error::Config(format!("{key} item `{s}`: {e}")))
                })
                .collect(),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::Config(format!("{key} = `{v}` is not a boolean"))),
        }
    }

    /// Builds a config. Recognised keys: `preset`, `n`, `p`, `scheme`
    /// (`fixed_gap`, `random_half`, `random_biased`, `defector`), `red`,
    /// `delta`, `p_r`, `variant` (`deterministic`, `lazy`), `p_ac`, `p_up`,
    /// `trials`, `seed`, `max_days`, `sweep_n`, `sweep_p`, `sweep_delta`,
    /// `sweep_p_r`, `snapshots`, `diagnostics`. With `preset` set, the other
    /// keys override the preset's values.
    pub fn to_config(&self, default_seed: u64) -> Result<ExperimentConfig> {
        const KNOWN: [&str; 21] = [
            "preset", "n", "p", "scheme", "red", "delta", "p_r", "variant", "p_ac", "p_up", "trials", "seed",
            "max_days", "sweep_n", "sweep_p", "sweep_delta", "sweep_p_r", "snapshots", "diagnostics", "threads",
            "lambda",
        ];
        if let Some(k) = self.0.keys().find(|k| !KNOWN.contains(&k.as_str()) && !matches!(k.as_str(), "out" | "format")) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let seed = self.parsed::<u64>("seed")?.unwrap_or(default_seed);
        let mut cfg = match self.get("preset") {
            Some(name) => preset(name, seed)?,
            // A grid alone is enough; its first value becomes the base.
            None => ExperimentConfig::new(
                match self.parsed("n")? {
                    Some(n) => n,
                    None => *self.list::<usize>("sweep_n")?.first().ok_or_else(|| Error::Config("n is required".into()))?,
                },
                match self.parsed("p")? {
                    Some(p) => p,
                    None => *self.list::<f64>("sweep_p")?.first().ok_or_else(|| Error::Config("p is required".into()))?,
                },
                Scheme::RandomHalf,
                1,
                seed,
            ),
        };
        if let Some(n) = self.parsed("n")? {
            cfg.n = n;
        }
        if let Some(p) = self.parsed("p")? {
            cfg.p = p;
        }
        let red: Option<usize> = self.parsed("red")?;
        let delta: Option<f64> = self.parsed("delta")?;
        let p_r: Option<f64> = self.parsed("p_r")?;
        let scheme_name = self.get("scheme").map(str::to_string).or_else(|| {
            if red.is_some() || delta.is_some() {
                Some("fixed_gap".into())
            } else if self.get("sweep_delta").is_some() && !matches!(cfg.scheme, Scheme::FixedGap { .. } | Scheme::DefectorModel { .. }) {
                Some("fixed_gap".into())
            } else if p_r.is_some() {
                Some("random_biased".into())
            } else {
                None
            }
        });
        if let Some(s) = scheme_name {
            cfg.scheme = match s.as_str() {
                "fixed_gap" => Scheme::FixedGap {
                    red_count: match (red, delta) {
                        (Some(r), _) => r,
                        (None, Some(d)) => red_for_gap(cfg.n, d)?,
                        (None, None) => match cfg.scheme {
                            Scheme::FixedGap { red_count } => red_count,
                            _ => match self.list::<f64>("sweep_delta")?.first() {
                                Some(&d) => red_for_gap(cfg.n, d)?,
                                None => return Err(Error::Config("fixed_gap needs red or delta".into())),
                            },
                        },
                    },
                },
                "random_half" => Scheme::RandomHalf,
                "random_biased" => Scheme::RandomBiased {
                    p_r: p_r.ok_or_else(|| Error::Config("random_biased needs p_r".into()))?,
                },
                "defector" => Scheme::DefectorModel {
                    delta: delta
                        .map(|d| {
                            if d >= 0.0 && d.fract() == 0.0 {
                                Ok(d as usize)
                            } else {
                                Err(Error::Config(format!("defector count {d} must be a non-negative integer")))
                            }
                        })
                        .transpose()?
                        .ok_or_else(|| Error::Config("defector needs delta".into()))?,
                },
                other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
            };
        }
        let p_ac: Option<f64> = self.parsed("p_ac")?;
        let p_up: Option<f64> = self.parsed("p_up")?;
        let lazy = match self.get("variant") {
            Some("lazy") => true,
            Some("deterministic") => false,
            Some(v) => return Err(Error::Config(format!("unknown variant `{v}`"))),
            None => p_ac.is_some() || p_up.is_some() || matches!(cfg.variant, VariantSpec::Lazy { .. }),
        };
        cfg.variant = if lazy {
            let (base_ac, base_up) = match cfg.variant {
                VariantSpec::Lazy { p_ac, p_up } => (p_ac, p_up),
                VariantSpec::Deterministic => (1.0, 1.0),
            };
            VariantSpec::Lazy {
                p_ac: p_ac.unwrap_or(base_ac),
                p_up: p_up.unwrap_or(base_up),
            }
        } else {
            VariantSpec::Deterministic
        };
        if let Some(t) = self.parsed("trials")? {
            cfg.trials = t;
        }
        if let Some(m) = self.parsed("max_days")? {
            cfg.max_days = Some(m);
        }
        if self.get("sweep_n").is_some() {
            cfg.sweep.n = self.list("sweep_n")?;
        }
        if self.get("sweep_p").is_some() {
            cfg.sweep.p = self.list("sweep_p")?;
        }
        if self.get("sweep_delta").is_some() {
            cfg.sweep.delta = self.list("sweep_delta")?;
        }
        if self.get("sweep_p_r").is_some() {
            cfg.sweep.p_r = self.list("sweep_p_r")?;
        }
        for (key, list_empty) in [
            ("sweep_n", cfg.sweep.n.is_empty()),
            ("sweep_p", cfg.sweep.p.is_empty()),
            ("sweep_delta", cfg.sweep.delta.is_empty()),
            ("sweep_p_r", cfg.sweep.p_r.is_empty()),
        ] {
            if self.get(key).is_some() && list_empty {
                return Err(Error::Config(format!("{key} must not be empty")));
            }
        }
        if self.get("snapshots").is_some() {
            cfg.snapshots = self.flag("snapshots")?;
        }
        if self.get("diagnostics").is_some() {
            cfg.diagnostics = self.flag("diagnostics")?;
        }
        cfg.master_seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn normalize_key(k: &str) -> String {
    k.trim_start_matches("--").replace('-', "_")
}

/// Red count for `|R_0| = n/2 + gap`; the result must be a whole number
/// in `0..=n`.
pub(crate) fn red_for_gap(n: usize, gap: f64) -> Result<usize> {
    let r = n as f64 / 2.0 + gap;
    if r.fract() != 0.0 || r < 0.0 || r > n as f64 {
        return Err(Error::Config(format!("gap {gap} does not give a whole red count in 0..={n}")));
    }
    Ok(r as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_only_config() {
        let m = ConfigMap::parse("n = 1000\nsweep_p = 0.1, 0.5\nsweep_delta = 1, 2, 4, 8\ntrials = 4\n").unwrap();
        let c = m.to_config(3).unwrap();
        assert_eq!(c.p, 0.1);
        assert_eq!(c.scheme, Scheme::FixedGap { red_count: 501 });
        assert_eq!(c.sweep.delta.len(), 4);
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let c = preset(name, 1).unwrap();
            c.validate().unwrap();
            assert_eq!(c.name, name);
        }
        let c = preset("power_of_few", 1).unwrap();
        assert_eq!((c.n, c.p, c.trials, c.max_days), (2000, 0.5, 2000, Some(16)));
        assert_eq!(c.scheme, Scheme::FixedGap { red_count: 1005 });
        let s = preset("subconnectivity", 1).unwrap();
        assert!((s.p - 0.5 * 5000f64.ln() / 5000.0).abs() < 1e-15);
        assert!(matches!(preset("nope", 1), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn max_days_defaults() {
        // ln 2000 / ln 1000 = 1.1 -> ceil 2 -> 16
        assert_eq!(default_max_days(2000, 0.5, VariantSpec::Deterministic).unwrap(), 16);
        let lazy = VariantSpec::Lazy { p_ac: 0.5, p_up: 0.5 };
        assert_eq!(default_max_days(2000, 0.5, lazy).unwrap(), (160.0 * 2000f64.ln()).ceil() as usize);
        assert!(default_max_days(10, 0.5, VariantSpec::Lazy { p_ac: 0.0, p_up: 1.0 }).is_err());
    }

    #[test]
    fn config_map_parsing() {
        let m = ConfigMap::parse("# comment\nn = 100\np=0.2\ndelta = 3 # gap\ntrials=7\nsweep-p = 0.1, 0.2\n").unwrap();
        let c = m.to_config(5).unwrap();
        assert_eq!((c.n, c.p, c.trials, c.master_seed), (100, 0.2, 7, 5));
        assert_eq!(c.scheme, Scheme::FixedGap { red_count: 53 });
        assert_eq!(c.sweep.p, vec![0.1, 0.2]);

        let mut m = ConfigMap::parse("preset = lazy\n").unwrap();
        m.set("trials", "3");
        m.set("p-ac", "1");
        let c = m.to_config(0).unwrap();
        assert_eq!(c.trials, 3);
        assert_eq!(c.variant, VariantSpec::Lazy { p_ac: 1.0, p_up: 0.5 });

        assert!(ConfigMap::parse("novalue\n").is_err());
        assert!(ConfigMap::parse("bogus = 1").unwrap().to_config(0).is_err());
        assert!(ConfigMap::parse("n = 10\np = 2").unwrap().to_config(0).is_err());
        assert!(ConfigMap::parse("n = 11\np = .5\ndelta = 1").unwrap().to_config(0).is_err());
        assert!(ConfigMap::parse("n = 10\np = .5\ntrials = 0").unwrap().to_config(0).is_err());
    }
}

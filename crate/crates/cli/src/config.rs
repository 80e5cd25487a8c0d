//! Run configuration: defaults, config-file parsing and flag overrides.
//!
//! Precedence: built-in defaults < config file < command-line flags.
//! The config file is flat `key = value` text with dotted sections and `#`
//! comments, e.g. `params.omega_y = 0.01`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mpemba_core::collision::Scheme;
use mpemba_core::SystemParams;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let n = self.count as f64 - 1.0;
        match self.spacing {
            Spacing::Linear => (0..self.count)
                .map(|i| self.min + (self.max - self.min) * i as f64 / n)
                .collect(),
            Spacing::Log => {
                let (a, b) = (self.min.ln(), self.max.ln());
                (0..self.count).map(|i| (a + (b - a) * i as f64 / n).exp()).collect()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        if self.count == 0 {
            return Err(format!("{name}: grid must be non-empty"));
        }
        if self.count > 1 && !(self.min < self.max) {
            return Err(format!("{name}: min {} must be < max {}", self.min, self.max));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(format!("{name}: log spacing needs positive min"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollisionSettings {
    pub tau: f64,
    pub scheme: Scheme,
    pub n_steps: usize,
    pub shots: u64,
    pub reps: u64,
}

/// Fully resolved run configuration; embedded in every output artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub temps: GridSpec,
    pub gammas: GridSpec,
    /// Time grid in units of gamma t.
    pub time: GridSpec,
    pub threshold: f64,
    pub collision: CollisionSettings,
    pub seed: u64,
    /// Output location; not part of the reproducible payload.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::symmetric(0.01, 2.0, 5.0).expect("valid defaults"),
            temps: GridSpec { min: 1.0, max: 30.0, count: 120, spacing: Spacing::Linear },
            gammas: GridSpec { min: 0.05, max: 10.0, count: 200, spacing: Spacing::Linear },
            time: GridSpec { min: 1e-3, max: 12.0, count: 400, spacing: Spacing::Log },
            threshold: 1e-8,
            collision: CollisionSettings {
                tau: 0.01,
                scheme: Scheme::III,
                n_steps: 100,
                shots: 256,
                reps: 40,
            },
            seed: 1,
            out_dir: PathBuf::from("mpemba-out"),
            format: OutputFormat::Csv,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.temps.validate("temps")?;
        self.gammas.validate("gammas")?;
        self.time.validate("time")?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if self.collision.tau <= 0.0 {
            return Err(format!("collision.tau {} must be positive", self.collision.tau));
        }
        if self.collision.n_steps == 0 {
            return Err("collision.n_steps must be positive".into());
        }
        if self.jobs == 0 {
            return Err("jobs must be >= 1".into());
        }
        Ok(())
    }

    /// Flattened `key = value` view used in reproducibility headers.
    pub fn flatten(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let p = &self.params;
        kv.push(("params.omega_y".into(), p.omega_y.to_string()));
        kv.push(("params.omega_z".into(), p.omega_z.to_string()));
        kv.push(("params.gamma_minus".into(), p.gamma_minus.to_string()));
        kv.push(("params.gamma_y".into(), p.gamma_y.to_string()));
        for (name, g) in [("temps", &self.temps), ("gammas", &self.gammas), ("time", &self.time)] {
            kv.push((format!("{name}.min"), g.min.to_string()));
            kv.push((format!("{name}.max"), g.max.to_string()));
            kv.push((format!("{name}.count"), g.count.to_string()));
            kv.push((
                format!("{name}.spacing"),
                match g.spacing {
                    Spacing::Linear => "linear".into(),
                    Spacing::Log => "log".to_string(),
                },
            ));
        }
        kv.push(("threshold".into(), self.threshold.to_string()));
        kv.push(("collision.tau".into(), self.collision.tau.to_string()));
        kv.push(("collision.scheme".into(), self.collision.scheme.to_string()));
        kv.push(("collision.n_steps".into(), self.collision.n_steps.to_string()));
        kv.push(("collision.shots".into(), self.collision.shots.to_string()));
        kv.push(("collision.reps".into(), self.collision.reps.to_string()));
        kv.push(("seed".into(), self.seed.to_string()));
        kv.push(("format".into(), match self.format {
            OutputFormat::Csv => "csv".into(),
            OutputFormat::Json => "json".to_string(),
        }));
        kv.push(("jobs".into(), self.jobs.to_string()));
        kv
    }
}

/// Parse the flat key-value config format.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, out: &mut T) -> Result<(), String>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = map.get(key) {
        *out = v.parse().map_err(|e| format!("config key {key} = {v}: {e}"))?;
    }
    Ok(())
}

pub fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s.trim() {
        "1" | "I" | "i" => Ok(Scheme::I),
        "2" | "II" | "ii" => Ok(Scheme::II),
        "3" | "III" | "iii" => Ok(Scheme::III),
        other => Err(format!("unknown scheme {other} (expected 1, 2 or 3)")),
    }
}

/// Apply config-file values over the defaults.
pub fn apply_file(cfg: &mut RunConfig, map: &BTreeMap<String, String>) -> Result<(), String> {
    let mut omega_y = cfg.params.omega_y;
    let mut omega_z = cfg.params.omega_z;
    let mut gamma_minus = cfg.params.gamma_minus;
    let mut gamma_y = cfg.params.gamma_y;
    parse(map, "params.omega_y", &mut omega_y)?;
    parse(map, "params.omega_z", &mut omega_z)?;
    if let Some(v) = map.get("params.gamma") {
        let g: f64 = v.parse().map_err(|e| format!("params.gamma = {v}: {e}"))?;
        gamma_minus = g;
        gamma_y = g;
    }
    parse(map, "params.gamma_minus", &mut gamma_minus)?;
    parse(map, "params.gamma_y", &mut gamma_y)?;
    cfg.params = SystemParams::new(omega_y, omega_z, gamma_minus, gamma_y)
        .map_err(|e| e.to_string())?;

    for (name, g) in [
        ("temps", &mut cfg.temps),
        ("gammas", &mut cfg.gammas),
        ("time", &mut cfg.time),
    ] {
        parse(map, &format!("{name}.min"), &mut g.min)?;
        parse(map, &format!("{name}.max"), &mut g.max)?;
        parse(map, &format!("{name}.count"), &mut g.count)?;
        if let Some(v) = map.get(&format!("{name}.spacing")) {
            g.spacing = match v.trim() {
                "linear" => Spacing::Linear,
                "log" => Spacing::Log,
                other => return Err(format!("{name}.spacing = {other}: expected linear|log")),
            };
        }
    }
    parse(map, "threshold", &mut cfg.threshold)?;
    parse(map, "collision.tau", &mut cfg.collision.tau)?;
    if let Some(v) = map.get("collision.scheme") {
        cfg.collision.scheme = parse_scheme(v)?;
    }
    parse(map, "collision.n_steps", &mut cfg.collision.n_steps)?;
    parse(map, "collision.shots", &mut cfg.collision.shots)?;
    parse(map, "collision.reps", &mut cfg.collision.reps)?;
    parse(map, "seed", &mut cfg.seed)?;
    parse(map, "jobs", &mut cfg.jobs)?;
    if let Some(v) = map.get("out") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some(v) = map.get("format") {
        cfg.format = match v.trim() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => return Err(format!("format = {other}: expected csv|json")),
        };
    }
    Ok(())
}

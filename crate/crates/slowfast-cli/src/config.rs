//! Flat key-value experiment configs: parsing, validation, defaults, and
//! canonical serialization.
//!
//! The format is one `key = value` pair per line, `#` comments, dotted keys
//! for nested groups (`tol.rel`). Unknown keys are errors, with an
//! edit-distance-1 suggestion when one exists. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;

/// Experiment kinds, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    BernoulliCheck,
    DelayReport,
    Crossings,
    AsymptoteCheck,
    CanardScan,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Simulate,
        Experiment::BernoulliCheck,
        Experiment::DelayReport,
        Experiment::Crossings,
        Experiment::AsymptoteCheck,
        Experiment::CanardScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::BernoulliCheck => "bernoulli-check",
            Experiment::DelayReport => "delay-report",
            Experiment::Crossings => "crossings",
            Experiment::AsymptoteCheck => "asymptote-check",
            Experiment::CanardScan => "canard-scan",
        }
    }

    pub fn from_name(s: &str) -> Option<Experiment> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Which model a `simulate` run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Transcritical,
    Enhanced,
    Vdp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Transcritical => "transcritical",
            ModelKind::Enhanced => "enhanced",
            ModelKind::Vdp => "vdp",
        }
    }

    fn from_name(s: &str) -> Option<ModelKind> {
        [Self::Transcritical, Self::Enhanced, Self::Vdp]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Xy,
    Uy,
}

impl ChartKind {
    pub fn name(self) -> &'static str {
        match self {
            ChartKind::Xy => "xy",
            ChartKind::Uy => "uy",
        }
    }
}

/// A fully validated experiment configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub epsilon: f64,
    pub model: ModelKind,
    pub chart: ChartKind,
    pub x0: f64,
    pub y0: f64,
    pub c: f64,
    pub t_end: f64,
    pub delta: f64,
    pub min_duration: f64,
    pub t_budget: f64,
    pub horizon: f64,
    pub n_crossings: u32,
    pub x0_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub mismatch_tol: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub tol_c: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub event_time_tol: f64,
    pub max_steps: u64,
    pub max_points: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Simulate,
            epsilon: 0.05,
            model: ModelKind::Enhanced,
            chart: ChartKind::Uy,
            x0: 0.5,
            y0: 0.0,
            c: -0.05,
            t_end: 100.0,
            delta: 0.05,
            min_duration: 10.0,
            t_budget: 0.0, // resolved per run when left at 0
            horizon: 200.0,
            n_crossings: 10,
            x0_list: vec![0.05, 0.1, 0.4],
            eps_list: vec![0.12, 0.1, 0.08],
            mismatch_tol: 1e-6,
            amp_low: 1.0,
            amp_high: 2.5,
            c_min: -0.2,
            c_max: 0.1,
            tol_c: 1e-9,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1.0,
            min_step: 1e-13,
            event_time_tol: 1e-12,
            max_steps: 50_000_000,
            max_points: 0,
        }
    }
}

/// A config error names the offending key and what would be accepted.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "epsilon",
    "model",
    "chart",
    "x0",
    "y0",
    "c",
    "t_end",
    "delta",
    "min_duration",
    "t_budget",
    "horizon",
    "n_crossings",
    "x0_list",
    "eps_list",
    "mismatch_tol",
    "amp_low",
    "amp_high",
    "c_min",
    "c_max",
    "tol_c",
    "tol.rel",
    "tol.abs",
    "tol.max_step",
    "tol.min_step",
    "tol.event_time",
    "tol.max_steps",
    "output.max_points",
];

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(key: &str) -> Option<&'static str> {
    KNOWN_KEYS
        .iter()
        .copied()
        .find(|k| edit_distance(key, k) == 1)
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| err(key, format!("`{v}` is not a number")))
        .and_then(|x| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(err(key, "value must be finite"))
            }
        })
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>()
        .map_err(|_| err(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Result<Vec<f64>, _> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(err(key, "list must not be empty"));
    }
    Ok(items)
}

/// Parse raw `key = value` lines into (key, value) pairs.
fn raw_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(
                &format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parse and validate a config text, applying documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let pairs = raw_pairs(text)?;
    apply_pairs(ExperimentConfig::default(), &pairs)
}

/// Apply `key=value` pairs (file contents or --override arguments) on top
/// of a base config, then validate.
pub fn apply_pairs(
    mut cfg: ExperimentConfig,
    pairs: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v) in pairs {
        if seen.insert(k.as_str(), v.as_str()).is_some() {
            return Err(err(k, "key given more than once (one value per key)"));
        }
    }
    for (key, value) in pairs {
        let k = key.as_str();
        let v = value.as_str();
        match k {
            "experiment" => {
                cfg.experiment = Experiment::from_name(v).ok_or_else(|| {
                    err(
                        k,
                        format!(
                            "`{v}` is not an experiment; expected one of {}",
                            Experiment::ALL.map(|e| e.name()).join(", ")
                        ),
                    )
                })?;
            }
            "model" => {
                cfg.model = ModelKind::from_name(v).ok_or_else(|| {
                    err(k, format!("`{v}` is not a model; expected transcritical, enhanced, or vdp"))
                })?;
            }
            "chart" => {
                cfg.chart = match v {
                    "xy" => ChartKind::Xy,
                    "uy" => ChartKind::Uy,
                    _ => return Err(err(k, format!("`{v}` is not a chart; expected xy or uy"))),
                };
            }
            "epsilon" => cfg.epsilon = parse_f64(k, v)?,
            "x0" => cfg.x0 = parse_f64(k, v)?,
            "y0" => cfg.y0 = parse_f64(k, v)?,
            "c" => cfg.c = parse_f64(k, v)?,
            "t_end" => cfg.t_end = parse_f64(k, v)?,
            "delta" => cfg.delta = parse_f64(k, v)?,
            "min_duration" => cfg.min_duration = parse_f64(k, v)?,
            "t_budget" => cfg.t_budget = parse_f64(k, v)?,
            "horizon" => cfg.horizon = parse_f64(k, v)?,
            "n_crossings" => cfg.n_crossings = parse_u64(k, v)? as u32,
            "x0_list" => cfg.x0_list = parse_list(k, v)?,
            "eps_list" => cfg.eps_list = parse_list(k, v)?,
            "mismatch_tol" => cfg.mismatch_tol = parse_f64(k, v)?,
            "amp_low" => cfg.amp_low = parse_f64(k, v)?,
            "amp_high" => cfg.amp_high = parse_f64(k, v)?,
            "c_min" => cfg.c_min = parse_f64(k, v)?,
            "c_max" => cfg.c_max = parse_f64(k, v)?,
            "tol_c" => cfg.tol_c = parse_f64(k, v)?,
            "tol.rel" => cfg.rel_tol = parse_f64(k, v)?,
            "tol.abs" => cfg.abs_tol = parse_f64(k, v)?,
            "tol.max_step" => cfg.max_step = parse_f64(k, v)?,
            "tol.min_step" => cfg.min_step = parse_f64(k, v)?,
            "tol.event_time" => cfg.event_time_tol = parse_f64(k, v)?,
            "tol.max_steps" => cfg.max_steps = parse_u64(k, v)?,
            "output.max_points" => cfg.max_points = parse_u64(k, v)?,
            unknown => {
                let mut msg = format!("unknown key `{unknown}`");
                if let Some(s) = suggest(unknown) {
                    msg.push_str(&format!("; did you mean `{s}`?"));
                }
                return Err(err(unknown, msg));
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn require_positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(err(key, format!("{v} is out of range; must be > 0")))
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    require_positive("tol.rel", cfg.rel_tol)?;
    require_positive("tol.abs", cfg.abs_tol)?;
    require_positive("tol.max_step", cfg.max_step)?;
    require_positive("tol.min_step", cfg.min_step)?;
    require_positive("tol.event_time", cfg.event_time_tol)?;
    if cfg.min_step >= cfg.max_step {
        return Err(err("tol.min_step", "must be smaller than tol.max_step"));
    }
    if cfg.max_steps == 0 {
        return Err(err("tol.max_steps", "must be at least 1"));
    }

    match cfg.experiment {
        Experiment::Simulate => {
            require_positive("epsilon", cfg.epsilon)?;
            require_positive("t_end", cfg.t_end)?;
            if cfg.model != ModelKind::Enhanced && cfg.chart == ChartKind::Uy {
                return Err(err("chart", "uy is only valid for model = enhanced"));
            }
            if cfg.model == ModelKind::Enhanced
                && cfg.chart == ChartKind::Uy
                && cfg.x0.abs() >= 1.0
            {
                return Err(err("x0", "must satisfy |x0| < 1 for the uy chart"));
            }
        }
        Experiment::BernoulliCheck => {
            if !(cfg.y0 > 0.0) {
                return Err(err("y0", format!("{} is out of range; must be > 0", cfg.y0)));
            }
            for &x0 in &cfg.x0_list {
                if !(x0 > 0.0 && x0 < 0.5 * cfg.y0) {
                    return Err(err(
                        "x0_list",
                        format!("entry {x0} is out of range; must satisfy 0 < x0 < y0/2"),
                    ));
                }
            }
            for &e in &cfg.eps_list {
                if !(e > 0.0) {
                    return Err(err("eps_list", format!("entry {e} must be > 0")));
                }
            }
            require_positive("mismatch_tol", cfg.mismatch_tol)?;
        }
        Experiment::DelayReport => {
            require_positive("epsilon", cfg.epsilon)?;
            if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
                return Err(err("delta", "must lie in (0, 1)"));
            }
            if !(cfg.x0.abs() < 1.0) {
                return Err(err("x0", "must satisfy |x0| < 1"));
            }
            if cfg.min_duration < 0.0 {
                return Err(err("min_duration", "must be >= 0"));
            }
        }
        Experiment::Crossings => {
            require_positive("epsilon", cfg.epsilon)?;
            if !(cfg.x0.abs() < 1.0) {
                return Err(err("x0", "must satisfy |x0| < 1"));
            }
            if cfg.n_crossings == 0 {
                return Err(err("n_crossings", "must be at least 1"));
            }
        }
        Experiment::AsymptoteCheck => {
            require_positive("epsilon", cfg.epsilon)?;
            require_positive("horizon", cfg.horizon)?;
            if !(cfg.x0.abs() > 1.0) {
                return Err(err("x0", "must satisfy |x0| > 1"));
            }
        }
        Experiment::CanardScan => {
            if cfg.eps_list.len() < 3 {
                return Err(err(
                    "eps_list",
                    format!(
                        "needs at least 3 values for the width fit, got {}",
                        cfg.eps_list.len()
                    ),
                ));
            }
            for &e in &cfg.eps_list {
                if !(e > 0.0) {
                    return Err(err("eps_list", format!("entry {e} must be > 0")));
                }
            }
            if !(cfg.c_min < cfg.c_max) {
                return Err(err("c_min", "must be smaller than c_max"));
            }
            if !(0.0 < cfg.amp_low && cfg.amp_low < cfg.amp_high) {
                return Err(err("amp_low", "thresholds must satisfy 0 < amp_low < amp_high"));
            }
            require_positive("tol_c", cfg.tol_c)?;
        }
    }
    Ok(())
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Canonical text form: every key, sorted, one per line. Parsing the output
/// reproduces the config exactly.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut pairs: Vec<(&str, String)> = vec![
        ("experiment", cfg.experiment.name().to_string()),
        ("epsilon", cfg.epsilon.to_string()),
        ("model", cfg.model.name().to_string()),
        ("chart", cfg.chart.name().to_string()),
        ("x0", cfg.x0.to_string()),
        ("y0", cfg.y0.to_string()),
        ("c", cfg.c.to_string()),
        ("t_end", cfg.t_end.to_string()),
        ("delta", cfg.delta.to_string()),
        ("min_duration", cfg.min_duration.to_string()),
        ("t_budget", cfg.t_budget.to_string()),
        ("horizon", cfg.horizon.to_string()),
        ("n_crossings", cfg.n_crossings.to_string()),
        ("x0_list", fmt_list(&cfg.x0_list)),
        ("eps_list", fmt_list(&cfg.eps_list)),
        ("mismatch_tol", cfg.mismatch_tol.to_string()),
        ("amp_low", cfg.amp_low.to_string()),
        ("amp_high", cfg.amp_high.to_string()),
        ("c_min", cfg.c_min.to_string()),
        ("c_max", cfg.c_max.to_string()),
        ("tol_c", cfg.tol_c.to_string()),
        ("tol.rel", cfg.rel_tol.to_string()),
        ("tol.abs", cfg.abs_tol.to_string()),
        ("tol.max_step", cfg.max_step.to_string()),
        ("tol.min_step", cfg.min_step.to_string()),
        ("tol.event_time", cfg.event_time_tol.to_string()),
        ("tol.max_steps", cfg.max_steps.to_string()),
        ("output.max_points", cfg.max_points.to_string()),
    ];
    pairs.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Echo of the resolved config as sorted key/value pairs (for the manifest).
pub fn config_echo(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    serialize_config(cfg)
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").expect("canonical form");
            (k.to_string(), v.to_string())
        })
        .collect()
}

//! The TOML run configuration.
//!
//! A configuration is resolved before any work is done: command-line
//! overrides are applied, section seeds missing from the file are derived
//! from the top-level `seed`, and system defaults (steps, step size, initial
//! set) are filled in. The resolved configuration is what gets written into
//! the run directory, so it reproduces the run on its own.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{Pairing, RecordKind, DEFAULT_BUDGET};
use crate::explore::ReachConfig;
use crate::falsify::{DensitySearchConfig, InverseSearchConfig};
use crate::net::{Activation, TrainConfig};
use crate::{builtin_system, BoxRegion};

/// A configuration problem, located in the source file where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
    pub file: Option<PathBuf>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.file, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: {}", p.display(), self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError { message: message.into(), line: None, file: None }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    #[serde(default)]
    pub seed: u64,
    /// Replacement feedback controller for systems that have one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_set: Option<BoxRegion>,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach: Option<ReachSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub falsify: Option<FalsifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub trajectories: usize,
    pub steps: Option<usize>,
    pub h: Option<f64>,
    pub seed: Option<u64>,
    /// Explicit initial states; replaces random sampling from the initial set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<Vec<f64>>>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { trajectories: 30, steps: None, h: None, seed: None, starts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: RecordKind,
    pub budget: usize,
    pub test_fraction: f64,
    pub pairing: Pairing,
    pub seed: Option<u64>,
    /// Also write the records as CSV.
    pub csv: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            kind: RecordKind::Forward,
            budget: DEFAULT_BUDGET,
            test_fraction: 0.1,
            pairing: Pairing::CrossOffset,
            seed: None,
            csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Seed of the weight initialization.
    pub seed: Option<u64>,
    pub train: TrainConfig,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            hidden: vec![128; 4],
            activation: Activation::Relu,
            seed: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Single initial state; when unset the corpus is simulated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub backward: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { x0: None, backward: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Model file, or `"oracle"` for the exact map of a linear system.
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachSection {
    pub model: String,
    pub targets: Vec<Vec<f64>>,
    /// Number of additional targets taken from simulated trajectories.
    pub sampled_targets: usize,
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(usize, usize)>,
    pub epsilon: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_vectors: Option<RandomVectorSection>,
}

impl Default for ReachSection {
    fn default() -> Self {
        let d = ReachConfig::default();
        Self {
            model: String::new(),
            targets: Vec::new(),
            sampled_targets: 0,
            steps: None,
            interval: None,
            epsilon: d.epsilon,
            iterations: d.iterations,
            restarts: d.restarts,
            seed: None,
            random_vectors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomVectorSection {
    pub first: usize,
    pub last: usize,
    pub count: usize,
    pub max_norm: f64,
    pub bins: usize,
}

impl Default for RandomVectorSection {
    fn default() -> Self {
        Self { first: 25, last: 70, count: 200, max_norm: 1.0, bins: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FalsifyMethod {
    Inverse,
    Density,
    Random,
    Map,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalsifySection {
    pub method: FalsifyMethod,
    #[serde(default)]
    pub model: String,
    #[serde(rename = "unsafe")]
    pub unsafe_set: BoxRegion,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub inverse: InverseSearchConfig,
    #[serde(default)]
    pub density: DensitySearchConfig,
    /// Simulation budget of the random baseline.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub model: String,
    /// Anchor initial state; the centre of the initial set if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    pub starts: Vec<Vec<f64>>,
    /// Number of extra starts drawn around the anchor.
    pub cluster: usize,
    /// Cluster half-width as a fraction of the initial set's width.
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    /// Also simulate every start and report the prediction error.
    pub check: bool,
    pub seed: Option<u64>,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            model: String::new(),
            anchor: None,
            starts: Vec::new(),
            cluster: 50,
            radius: 0.05,
            window: None,
            check: true,
            seed: None,
        }
    }
}

/// Seeds derived from the top-level seed when a section leaves them out.
const DERIVED_SEEDS: &[(&str, u64)] = &[
    ("corpus.seed", 1),
    ("dataset.seed", 2),
    ("net.seed", 3),
    ("net.train.seed", 4),
    ("reach.seed", 5),
    ("falsify.seed", 6),
    ("predict.seed", 7),
];

/// Line (1-based) where `dotted` is set in `text`, if it can be found.
pub fn locate(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = match dotted.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", dotted),
    };
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        let k = line.split('=').next().unwrap_or("").trim();
        if current == section && k == key && line.contains('=') {
            return Some(i + 1);
        }
        // dotted keys inside a parent table, e.g. `train.epochs = 3` under [net]
        if !current.is_empty() && format!("{current}.{k}") == dotted && line.contains('=') {
            return Some(i + 1);
        }
        if current.is_empty() && k == dotted && line.contains('=') {
            return Some(i + 1);
        }
    }
    section_line
}

fn toml_error(e: toml::de::Error, text: &str) -> ConfigError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    ConfigError { message: e.message().trim().to_string(), line, file: None }
}

/// Parses an override value as TOML, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn get<'a>(table: &'a Table, dotted: &str) -> Option<&'a Value> {
    let mut parts = dotted.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn set(table: &mut Table, dotted: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = dotted.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| err(format!("`{p}` in `{dotted}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Applies `key=value` overrides and an optional seed to the raw table.
pub fn apply_overrides(table: &mut Table, overrides: &[String], seed: Option<u64>) -> Result<(), ConfigError> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| err(format!("override `{o}` is not of the form key=value")))?;
        let k = k.trim();
        if k.is_empty() || k.split('.').any(str::is_empty) {
            return Err(err(format!("override `{o}` has an empty key")));
        }
        set(table, k, parse_value(v.trim()))?;
    }
    if let Some(s) = seed {
        set(table, "seed", Value::Integer(s as i64))?;
    }
    Ok(())
}

/// Parses, overrides, fills defaults and validates a configuration.
pub fn resolve(text: &str, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    // Structural errors are reported against the file as written.
    toml::from_str::<RunConfig>(text).map_err(|e| toml_error(e, text))?;
    let mut table: Table = text.parse().map_err(|e| toml_error(e, text))?;
    apply_overrides(&mut table, overrides, seed)?;

    let base = match table.get("seed") {
        Some(Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(_) => {
            return Err(ConfigError {
                message: "`seed` must be a non-negative integer".into(),
                line: locate(text, "seed"),
                file: None,
            })
        }
        None => 0,
    };
    for (key, offset) in DERIVED_SEEDS {
        let section = key.split('.').next().unwrap_or_default();
        let present = matches!(section, "corpus" | "dataset" | "net") || table.contains_key(section);
        if present && get(&table, key).is_none() {
            set(&mut table, key, Value::Integer(base.wrapping_add(*offset) as i64))?;
        }
    }

    let mut cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| err(format!("after overrides: {}", e.message().trim())))?;

    let sys = builtin_system(&cfg.system).map_err(|e| ConfigError {
        message: e.to_string(),
        line: locate(text, "system"),
        file: None,
    })?;
    cfg.system = sys.name().to_string();
    let meta = sys.meta();
    cfg.corpus.steps.get_or_insert(meta.horizon);
    cfg.corpus.h.get_or_insert(sys.default_step());
    if cfg.init_set.is_none() {
        cfg.init_set = Some(meta.init_set.clone());
    }
    if let Some(f) = cfg.falsify.as_mut() {
        f.horizon.get_or_insert(meta.horizon);
    }
    validate(&cfg, text, overrides, &sys)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, text: &str, overrides: &[String], sys: &crate::SystemSpec) -> Result<(), ConfigError> {
    let at = |key: &str, msg: String| {
        let overridden = overrides
            .iter()
            .any(|o| o.split('=').next().is_some_and(|k| k.trim() == key || k.trim().starts_with(&format!("{key}."))));
        if overridden {
            ConfigError { message: format!("`{key}` (set on the command line): {msg}"), line: None, file: None }
        } else {
            ConfigError { message: format!("`{key}`: {msg}"), line: locate(text, key), file: None }
        }
    };
    let n = sys.dim();
    let theta = cfg.init_set.as_ref().expect("filled in by resolve");
    if theta.dim() != n {
        return Err(at("init_set", format!("has dimension {}, system has {n}", theta.dim())));
    }
    if !theta.is_subset_of(sys.domain()) {
        return Err(at("init_set", "is not inside the system domain".into()));
    }
    if cfg.corpus.trajectories < 2 && cfg.corpus.starts.is_none() {
        return Err(at("corpus.trajectories", "needs at least 2 trajectories".into()));
    }
    if let Some(starts) = &cfg.corpus.starts {
        if starts.len() < 2 || starts.iter().any(|s| s.len() != n) {
            return Err(at("corpus.starts", format!("needs at least 2 states of dimension {n}")));
        }
    }
    let h = cfg.corpus.h.expect("filled in");
    if !(h > 0.0) || !h.is_finite() {
        return Err(at("corpus.h", format!("must be > 0, got {h}")));
    }
    if cfg.dataset.budget == 0 {
        return Err(at("dataset.budget", "must be ≥ 1".into()));
    }
    if !(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0) {
        return Err(at("dataset.test_fraction", format!("must be in (0, 1), got {}", cfg.dataset.test_fraction)));
    }
    if cfg.net.hidden.is_empty() || cfg.net.hidden.contains(&0) {
        return Err(at("net.hidden", "needs at least one nonzero layer width".into()));
    }
    cfg.net.train.validate().map_err(|e| at("net.train", e.to_string()))?;
    if let Some(x0) = cfg.simulate.as_ref().and_then(|s| s.x0.as_ref()) {
        if x0.len() != n {
            return Err(at("simulate.x0", format!("has dimension {}, system has {n}", x0.len())));
        }
    }
    if let Some(r) = &cfg.reach {
        if r.model.is_empty() {
            return Err(at("reach.model", "is required".into()));
        }
        if r.targets.iter().any(|z| z.len() != n) {
            return Err(at("reach.targets", format!("every target needs dimension {n}")));
        }
        if r.targets.is_empty() && r.sampled_targets == 0 && r.random_vectors.is_none() {
            return Err(at("reach.targets", "no targets given".into()));
        }
        ReachConfig { epsilon: r.epsilon, iterations: r.iterations, restarts: r.restarts, seed: 0 }
            .validate()
            .map_err(|e| at("reach", e.to_string()))?;
        if let Some((a, b)) = r.interval {
            if a > b || a == 0 {
                return Err(at("reach.interval", format!("[{a}, {b}] is not a valid step interval")));
            }
        }
    }
    if let Some(f) = &cfg.falsify {
        if f.unsafe_set.dim() != n {
            return Err(at("falsify.unsafe", format!("has dimension {}, system has {n}", f.unsafe_set.dim())));
        }
        if f.method != FalsifyMethod::Random && f.model.is_empty() {
            return Err(at("falsify.model", "is required for this method".into()));
        }
        if f.horizon == Some(0) {
            return Err(at("falsify.horizon", "must be ≥ 1".into()));
        }
    }
    if let Some(p) = &cfg.predict {
        if p.model.is_empty() {
            return Err(at("predict.model", "is required".into()));
        }
        if p.anchor.as_ref().is_some_and(|a| a.len() != n) || p.starts.iter().any(|s| s.len() != n) {
            return Err(at("predict", format!("states need dimension {n}")));
        }
        if p.starts.is_empty() && p.cluster == 0 {
            return Err(at("predict.cluster", "no starts to predict".into()));
        }
    }
    if let Some(e) = &cfg.eval {
        if e.model.is_empty() {
            return Err(at("eval.model", "is required".into()));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn h(&self) -> f64 {
        self.corpus.h.expect("resolved")
    }

    pub fn steps(&self) -> usize {
        self.corpus.steps.expect("resolved")
    }

    pub fn theta(&self) -> &BoxRegion {
        self.init_set.as_ref().expect("resolved")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Seeds in effect, by key.
    pub fn seeds(&self) -> Vec<(String, u64)> {
        let mut s = vec![("seed".to_string(), self.seed)];
        let mut push = |k: &str, v: Option<u64>| {
            if let Some(v) = v {
                s.push((k.to_string(), v));
            }
        };
        push("corpus.seed", self.corpus.seed);
        push("dataset.seed", self.dataset.seed);
        push("net.seed", self.net.seed);
        push("net.train.seed", Some(self.net.train.seed));
        push("reach.seed", self.reach.as_ref().and_then(|r| r.seed));
        push("falsify.seed", self.falsify.as_ref().and_then(|f| f.seed));
        push("predict.seed", self.predict.as_ref().and_then(|p| p.seed));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "system = \"Vanderpol\"\nseed = 5\n\n[corpus]\ntrajectories = 4\nsteps = 20\n";

    #[test]
    fn defaults_and_derived_seeds_are_filled_in() {
        let cfg = resolve(BASE, &[], None).unwrap();
        assert_eq!(cfg.h(), 0.01);
        assert_eq!(cfg.corpus.seed, Some(6));
        assert_eq!(cfg.net.train.seed, 9);
        assert!(cfg.reach.is_none());
    }

    #[test]
    fn resolved_config_is_a_fixed_point() {
        let cfg = resolve(BASE, &["dataset.budget=500".into()], Some(11)).unwrap();
        let again = resolve(&cfg.to_toml(), &[], None).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(cfg.dataset.budget, 500);
        assert_eq!(cfg.seed, 11);
    }

    #[test]
    fn explicit_section_seed_wins() {
        let cfg = resolve(&format!("{BASE}seed = 99\n"), &[], None).unwrap();
        assert_eq!(cfg.corpus.seed, Some(99));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let e = resolve(&format!("{BASE}bogus = 1\n"), &[], None).unwrap_err();
        assert_eq!(e.line, Some(7), "{e}");
    }

    #[test]
    fn semantic_error_reports_its_line() {
        let text = "system = \"Vanderpol\"\n[dataset]\nbudget = 10\ntest_fraction = 1.0\n";
        let e = resolve(text, &[], None).unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");
    }

    #[test]
    fn unknown_system_is_a_config_error() {
        let e = resolve("system = \"Quadrotor\"\n", &[], None).unwrap_err();
        assert_eq!(e.line, Some(1));
        assert!(e.message.contains("Vanderpol"));
    }

    #[test]
    fn override_values_parse_as_toml() {
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("[1.0, 2.0]"), Value::Array(vec![Value::Float(1.0), Value::Float(2.0)]));
        assert_eq!(parse_value("inverse"), Value::String("inverse".into()));
    }
}

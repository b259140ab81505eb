//! Configuration-driven pipeline behind the `neurosens` binary.
//!
//! Every verb except `systems` reads one TOML file, resolves it, and writes
//! its artifacts into a fresh run directory together with `config.toml` (the
//! resolved configuration) and `manifest.json`. Rerunning with the written
//! `config.toml` reproduces every output byte for byte.
//!
//! Exit status: 0 on success (a falsified specification is a result, not a
//! failure), 1 on errors raised by the computation, 2 on configuration errors.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    resolve, ConfigError, CorpusSection, DatasetSection, FalsifyMethod, FalsifySection, ModelSection,
    NetSection, PredictSection, RandomVectorSection, ReachSection, RunConfig, SimulateSection,
};

use crate::data::{generate_corpus, generate_corpus_from, make_records, Corpus, Dataset, RecordConfig, RecordKind};
use crate::dynamics::{builtin_names, load_controller};
use crate::explore::{
    bin_by_norm, predict_batch, random_vector_eval, reach_targets, write_predictions_csv, TimeSpec,
    VectorEvalConfig,
};
use crate::falsify::{
    falsify_forward_density, falsify_inverse, falsify_random_baseline, inverse_density_map, write_profile_csv,
    DensityMapConfig, SafetySpec,
};
use crate::linalg::{dist, norm, sub};
use crate::net::{evaluate_model, Metrics, Mlp, ModelMeta, SensitivityModel, SensitivityNet};
use crate::sim::{simulate, simulate_backward, write_trajectories, LinearSensitivity, SensOracle};
use crate::{builtin_system, BoxRegion, Error, SystemSpec};

#[derive(Debug, Parser)]
#[command(name = "neurosens", version, about = "Learned sensitivity of closed-loop systems")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Override a configuration key, e.g. `--set dataset.budget=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run directory; must not exist yet. Defaults to `runs/<verb>-<n>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed from which unset section seeds are derived.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// List the built-in systems, or show one system's metadata as JSON.
    Systems {
        name: Option<String>,
        /// Literal `list` is accepted for symmetry with the other verbs.
        #[arg(hide = true)]
        extra: Option<String>,
    },
    /// Simulate one initial state or the whole corpus.
    Simulate(RunArgs),
    /// Build, split and save a sensitivity dataset.
    Dataset(RunArgs),
    /// Train a sensitivity network.
    Train(RunArgs),
    /// Evaluate a saved network on regenerated held-out records.
    Eval(RunArgs),
    /// Steer trajectories toward targets with an inverse-sensitivity model.
    Reach(RunArgs),
    /// Search for a trajectory entering an unsafe box.
    Falsify(RunArgs),
    /// Predict neighbouring trajectories from one anchor simulation.
    Predict(RunArgs),
}

impl Verb {
    fn name(&self) -> &'static str {
        match self {
            Verb::Systems { .. } => "systems",
            Verb::Simulate(_) => "simulate",
            Verb::Dataset(_) => "dataset",
            Verb::Train(_) => "train",
            Verb::Eval(_) => "eval",
            Verb::Reach(_) => "reach",
            Verb::Falsify(_) => "falsify",
            Verb::Predict(_) => "predict",
        }
    }
}

/// Why a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Domain(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Domain(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(ConfigError { message: m, line: None, file: None }),
            e @ Error::NotFound { .. } => Failure::Config(ConfigError { message: e.to_string(), line: None, file: None }),
            other => Failure::Domain(other),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses arguments, runs the verb, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env("NEUROSENS_LOG")
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.verb) {
        Ok(Some(dir)) => {
            println!("{}", dir.display());
            0
        }
        Ok(None) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

/// Runs one verb; returns the run directory for verbs that create one.
pub fn run(verb: Verb) -> Outcome<Option<PathBuf>> {
    let name = verb.name();
    let args = match verb {
        Verb::Systems { name, extra } => {
            let name = name.filter(|n| n != "list").or(extra);
            systems(name.as_deref())?;
            return Ok(None);
        }
        Verb::Simulate(a) | Verb::Dataset(a) | Verb::Train(a) | Verb::Eval(a) | Verb::Reach(a)
        | Verb::Falsify(a) | Verb::Predict(a) => a,
    };
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Failure::Config(ConfigError { message: e.to_string(), line: None, file: Some(args.config.clone()) })
    })?;
    let cfg = resolve(&text, &args.overrides, args.seed).map_err(|mut e| {
        e.file = Some(args.config.clone());
        e
    })?;
    if let Some(section) = required_section(name, &cfg) {
        return Err(Failure::Config(ConfigError {
            message: format!("the `{name}` verb needs a [{section}] section"),
            line: None,
            file: Some(args.config.clone()),
        }));
    }
    let dir = prepare_out(args.out.as_deref(), name)?;
    let result = execute(name, cfg, dir.clone());
    if result.is_err() {
        // The directory was created by this command; drop partial output.
        let _ = fs::remove_dir_all(&dir);
    }
    result.map(|_| Some(dir))
}

fn execute(name: &str, cfg: RunConfig, dir: PathBuf) -> Outcome<()> {
    let mut run = Run::new(cfg, dir)?;
    match name {
        "simulate" => run.simulate()?,
        "dataset" => run.dataset()?,
        "train" => run.train()?,
        "eval" => run.eval()?,
        "reach" => run.reach()?,
        "falsify" => run.falsify()?,
        "predict" => run.predict()?,
        _ => unreachable!("systems handled above"),
    }
    run.finish(name)
}

fn required_section(verb: &'static str, cfg: &RunConfig) -> Option<&'static str> {
    let missing = match verb {
        "eval" => cfg.eval.is_none(),
        "reach" => cfg.reach.is_none(),
        "falsify" => cfg.falsify.is_none(),
        "predict" => cfg.predict.is_none(),
        _ => false,
    };
    missing.then_some(verb)
}

fn systems(name: Option<&str>) -> Outcome<()> {
    let mut out = std::io::stdout().lock();
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = systems_to(&mut out, name)?;
    Ok(())
}

fn systems_to<W: Write>(out: &mut W, name: Option<&str>) -> Outcome<std::io::Result<()>> {
    match name {
        Some(n) => {
            let sys = builtin_system(n)?;
            let info = json!({
                "name": sys.name(),
                "kind": format!("{:?}", sys.kind()).to_lowercase(),
                "dim": sys.dim(),
                "domain": sys.domain(),
                "control_dim": sys.control_dim(),
                "meta": sys.meta(),
            });
            return Ok(writeln!(out, "{}", serde_json::to_string_pretty(&info).expect("json")));
        }
        None => {
            if let Err(e) = writeln!(out, "{:<24} {:<10} {:>3} {:>8} {:>8}  description", "name", "kind", "n", "step", "horizon") {
                return Ok(Err(e));
            }
            for n in builtin_names() {
                let sys = builtin_system(n)?;
                let m = sys.meta();
                let step = m.step.map_or("-".to_string(), |s| s.to_string());
                let r = writeln!(
                    out,
                    "{:<24} {:<10} {:>3} {:>8} {:>8}  {}",
                    sys.name(),
                    format!("{:?}", sys.kind()).to_lowercase(),
                    sys.dim(),
                    step,
                    m.horizon,
                    m.description
                );
                if r.is_err() {
                    return Ok(r);
                }
            }
        }
    }
    Ok(Ok(()))
}

fn prepare_out(out: Option<&Path>, verb: &str) -> Outcome<PathBuf> {
    let dir = match out {
        Some(d) => {
            if d.exists() && fs::read_dir(d).map(|mut r| r.next().is_some()).unwrap_or(true) {
                return Err(Failure::Config(ConfigError {
                    message: format!("run directory {} already exists and is not empty", d.display()),
                    line: None,
                    file: None,
                }));
            }
            d.to_path_buf()
        }
        None => (1..)
            .map(|i| Path::new("runs").join(format!("{verb}-{i:03}")))
            .find(|p| !p.exists())
            .expect("some index is free"),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Either a trained network or the exact map of a linear system.
pub enum LoadedModel {
    Net(SensitivityNet),
    Oracle(LinearSensitivity),
}

impl LoadedModel {
    pub fn as_model(&self) -> &dyn SensitivityModel {
        match self {
            LoadedModel::Net(n) => n,
            LoadedModel::Oracle(o) => o,
        }
    }

    pub fn kind(&self, fallback: RecordKind) -> RecordKind {
        match self {
            LoadedModel::Net(n) => n.kind(),
            LoadedModel::Oracle(_) => fallback,
        }
    }
}

/// Loads `spec` (a path or `"oracle"`) as a model of the given kind.
pub fn load_model(spec: &str, sys: &SystemSpec, kind: Option<RecordKind>) -> Result<LoadedModel, Error> {
    if spec == "oracle" {
        let oracle = SensOracle::from_system(sys)?;
        return Ok(LoadedModel::Oracle(oracle.model(kind == Some(RecordKind::Inverse))));
    }
    let net = SensitivityNet::load(Path::new(spec))?;
    if net.meta().dim != sys.dim() {
        return Err(Error::dim("model state", sys.dim(), net.meta().dim));
    }
    if let Some(k) = kind {
        if net.kind() != k {
            return Err(Error::Config(format!(
                "model {spec} has kind `{}`, this step needs kind `{}`",
                net.kind().as_str(),
                k.as_str()
            )));
        }
    }
    if net.meta().system != sys.name() {
        log::warn!("model {spec} was trained on {}, not {}", net.meta().system, sys.name());
    }
    Ok(LoadedModel::Net(net))
}

struct Run {
    cfg: RunConfig,
    sys: SystemSpec,
    dir: PathBuf,
    outputs: Vec<String>,
    extra: serde_json::Map<String, Value>,
}

impl Run {
    fn new(cfg: RunConfig, dir: PathBuf) -> Outcome<Self> {
        let mut sys = builtin_system(&cfg.system)?;
        if let Some(path) = &cfg.controller {
            if sys.controller().is_none() {
                return Err(Failure::Config(ConfigError {
                    message: format!("`controller`: {} has no feedback controller to replace", sys.name()),
                    line: None,
                    file: None,
                }));
            }
            sys = sys.with_controller(load_controller(path)?)?;
        }
        Ok(Self { cfg, sys, dir, outputs: Vec::new(), extra: serde_json::Map::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Outcome<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome<()> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_with<F>(&mut self, name: &str, f: F) -> Outcome<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let p = self.path(name);
        let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    fn finish(mut self, verb: &str) -> Outcome<()> {
        let config = self.cfg.to_toml();
        let cp = self.dir.join("config.toml");
        fs::write(&cp, &config).map_err(|e| Error::io(&cp, e))?;
        let seeds: serde_json::Map<String, Value> =
            self.cfg.seeds().into_iter().map(|(k, v)| (k, json!(v))).collect();
        let mut manifest = json!({
            "tool": "neurosens",
            "version": env!("CARGO_PKG_VERSION"),
            "verb": verb,
            "system": self.sys.name(),
            "config": "config.toml",
            "seeds": seeds,
            "outputs": self.outputs,
        });
        let obj = manifest.as_object_mut().expect("object");
        obj.append(&mut self.extra);
        let mp = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("json");
        text.push('\n');
        fs::write(&mp, text).map_err(|e| Error::io(&mp, e))?;
        Ok(())
    }

    fn corpus(&self) -> Result<Corpus, Error> {
        let c = &self.cfg.corpus;
        match &c.starts {
            Some(starts) => generate_corpus_from(&self.sys, starts, self.cfg.steps(), self.cfg.h()),
            None => generate_corpus(
                &self.sys,
                self.cfg.theta(),
                c.trajectories,
                self.cfg.steps(),
                self.cfg.h(),
                c.seed.unwrap_or(0),
            ),
        }
    }

    fn split_records(&self, kind: RecordKind) -> Result<(Dataset, Dataset), Error> {
        let corpus = self.corpus()?;
        let d = &self.cfg.dataset;
        let rc = RecordConfig { kind, budget: d.budget, seed: d.seed.unwrap_or(0), pairing: d.pairing };
        make_records(&corpus, &rc)?.split(d.test_fraction)
    }

    fn reference(&self, kind: RecordKind) -> Value {
        let m = self.sys.meta();
        let r = match kind {
            RecordKind::Forward => m.reference_forward,
            RecordKind::Inverse => m.reference_inverse,
        };
        json!(r)
    }

    fn simulate(&mut self) -> Outcome<()> {
        let sc = self.cfg.simulate.clone().unwrap_or_default();
        match sc.x0 {
            Some(x0) => {
                let traj = if sc.backward {
                    simulate_backward(&self.sys, &x0, self.cfg.steps(), self.cfg.h())?
                } else {
                    simulate(&self.sys, &x0, self.cfg.steps(), self.cfg.h())?
                };
                self.write_with("trajectory.csv", |w| traj.write_csv(w))
            }
            None => {
                if sc.backward {
                    return Err(Failure::Config(ConfigError {
                        message: "`simulate.backward` needs `simulate.x0`".into(),
                        line: None,
                        file: None,
                    }));
                }
                let corpus = self.corpus()?;
                for (i, t) in corpus.trajectories.iter().enumerate() {
                    self.write_with(&format!("traj-{i:03}.csv"), |w| t.write_csv(w))?;
                }
                self.write_with("trajectories.bin", |w| write_trajectories(w, &corpus.trajectories))
            }
        }
    }

    fn dataset(&mut self) -> Outcome<()> {
        let kind = self.cfg.dataset.kind;
        let (train, test) = self.split_records(kind)?;
        for (stem, ds) in [("train", &train), ("test", &test)] {
            self.outputs.push(format!("{stem}.bin"));
            self.outputs.push(format!("{stem}.json"));
            ds.save(&self.dir, stem)?;
            if self.cfg.dataset.csv {
                self.write_with(&format!("{stem}.csv"), |w| ds.write_csv(w))?;
            }
        }
        self.extra.insert("records".into(), json!({"train": train.len(), "test": test.len()}));
        Ok(())
    }

    fn train(&mut self) -> Outcome<()> {
        let kind = self.cfg.dataset.kind;
        let (train, test) = self.split_records(kind)?;
        let n = self.sys.dim();
        let mut widths = vec![2 * n + 1];
        widths.extend(&self.cfg.net.hidden);
        widths.push(n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.net.seed.unwrap_or(0));
        let tc = self.cfg.net.train.clone();
        let mlp = Mlp::new(&widths, self.cfg.net.activation, tc.init, &mut rng)?;
        let (mlp, history) = crate::net::train(mlp, &train, &tc)?;
        let meta = ModelMeta { system: self.sys.name().to_string(), kind, h: self.cfg.h(), dim: n };
        let norm = train.normalization.clone().expect("split fits normalization");
        let net = SensitivityNet::new(mlp, norm, meta)?;
        let model_name = format!("model-{}.json", kind.as_str());
        let p = self.path(&model_name);
        net.save(&p)?;
        let train_m = evaluate_model(&net, &train.records)?;
        let test_m = evaluate_model(&net, &test.records)?;
        let metrics = json!({
            "kind": kind.as_str(),
            "train": train_m,
            "test": test_m,
            "mse": test_m.mse,
            "rmse": test_m.rmse,
            "mre": test_m.mre,
            "reference": self.reference(kind),
        });
        self.write_json(&format!("metrics-{}.json", kind.as_str()), &metrics)?;
        self.write_with(&format!("loss-{}.csv", kind.as_str()), |w| {
            writeln!(w, "epoch,loss")?;
            for (e, l) in history.iter().enumerate() {
                writeln!(w, "{},{l}", e + 1)?;
            }
            Ok(())
        })?;
        self.extra.insert("reference".into(), self.reference(kind));
        Ok(())
    }

    fn eval(&mut self) -> Outcome<()> {
        let spec = self.cfg.eval.clone().expect("validated").model;
        let model = load_model(&spec, &self.sys, None)?;
        let kind = model.kind(self.cfg.dataset.kind);
        let (_, test) = self.split_records(kind)?;
        let m: Metrics = evaluate_model(model.as_model(), &test.records)?;
        let reference = self.reference(kind);
        self.write_json(
            "metrics.json",
            &json!({
                "kind": kind.as_str(),
                "mse": m.mse,
                "rmse": m.rmse,
                "mre": m.mre,
                "count": m.count,
                "reference": reference,
            }),
        )?;
        self.extra.insert("reference".into(), reference);
        Ok(())
    }

    fn reach(&mut self) -> Outcome<()> {
        let rs = self.cfg.reach.clone().expect("validated");
        let model = load_model(&rs.model, &self.sys, Some(RecordKind::Inverse))?;
        let inv = model.as_model();
        let (h, theta) = (self.cfg.h(), self.cfg.theta().clone());
        let seed = rs.seed.unwrap_or(0);
        let time = match rs.interval {
            Some((a, b)) => TimeSpec::Interval(a, b),
            None => TimeSpec::At(rs.steps.unwrap_or(self.cfg.steps())),
        };
        let mut targets = rs.targets.clone();
        if rs.sampled_targets > 0 {
            let at = match time {
                TimeSpec::At(s) => s,
                TimeSpec::Interval(_, b) => b,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a26_e7);
            for _ in 0..rs.sampled_targets {
                let x = theta.sample(&mut rng);
                targets.push(simulate(&self.sys, &x, at, h)?.last().to_vec());
            }
        }
        if !targets.is_empty() {
            let rc = crate::explore::ReachConfig {
                epsilon: rs.epsilon,
                iterations: rs.iterations,
                restarts: rs.restarts,
                seed,
            };
            let results = reach_targets(&self.sys, inv, &targets, time, h, &theta, &rc);
            let mut rows = Vec::new();
            for (i, (z, r)) in targets.iter().zip(&results).enumerate() {
                match r {
                    Ok(r) => {
                        self.write_with(&format!("reach-iterates-{i:03}.csv"), |w| r.write_iterates_csv(w))?;
                        rows.push(json!({"target": z, "result": r}));
                    }
                    Err(e) => rows.push(json!({"target": z, "error": e.to_string()})),
                }
            }
            self.write_json("reach.json", &rows)?;
        }
        if let Some(rv) = &rs.random_vectors {
            let vc = VectorEvalConfig {
                first: rv.first,
                last: rv.last,
                count: rv.count,
                max_norm: rv.max_norm,
                seed: seed.wrapping_add(1),
            };
            let probes = random_vector_eval(&self.sys, inv, &theta, h, &vc)?;
            let bins = bin_by_norm(&probes, rv.bins);
            self.write_json("vectors.json", &json!({"bins": bins, "probes": probes}))?;
        }
        Ok(())
    }

    fn falsify(&mut self) -> Outcome<()> {
        let fs_ = self.cfg.falsify.clone().expect("validated");
        let (h, theta) = (self.cfg.h(), self.cfg.theta().clone());
        let mut spec = SafetySpec::new(fs_.unsafe_set.clone(), fs_.horizon.expect("resolved"));
        spec.window = fs_.window;
        let seed = fs_.seed.unwrap_or(0);
        let report = match fs_.method {
            FalsifyMethod::Random => falsify_random_baseline(&self.sys, &spec, &theta, h, fs_.budget, seed)?,
            FalsifyMethod::Inverse => {
                let m = load_model(&fs_.model, &self.sys, Some(RecordKind::Inverse))?;
                let cfg = crate::falsify::InverseSearchConfig { seed, ..fs_.inverse.clone() };
                falsify_inverse(&self.sys, m.as_model(), &spec, &theta, h, &cfg)?
            }
            FalsifyMethod::Density => {
                let m = load_model(&fs_.model, &self.sys, Some(RecordKind::Forward))?;
                let cfg = crate::falsify::DensitySearchConfig { seed, ..fs_.density.clone() };
                falsify_forward_density(&self.sys, m.as_model(), &spec, &theta, h, &cfg)?
            }
            FalsifyMethod::Map => {
                let m = load_model(&fs_.model, &self.sys, Some(RecordKind::Inverse))?;
                let cfg = DensityMapConfig {
                    targets: fs_.inverse.targets,
                    epsilon: fs_.inverse.epsilon,
                    iterations: fs_.inverse.iterations,
                    steps: None,
                    seed,
                };
                let profile = inverse_density_map(&self.sys, m.as_model(), &spec, &theta, h, &cfg)?;
                self.write_with("profile.csv", |w| write_profile_csv(w, &profile))?;
                return self.write_json("profile.json", &profile);
            }
        };
        self.write_json("report.json", &report)?;
        self.write_with("profile.csv", |w| report.write_profile_csv(w))
    }

    fn predict(&mut self) -> Outcome<()> {
        let ps = self.cfg.predict.clone().expect("validated");
        let model = load_model(&ps.model, &self.sys, Some(RecordKind::Forward))?;
        let (h, steps, theta) = (self.cfg.h(), self.cfg.steps(), self.cfg.theta().clone());
        let anchor_x = ps.anchor.clone().unwrap_or_else(|| theta.center());
        let anchor = simulate(&self.sys, &anchor_x, steps, h)?;
        let mut starts = ps.starts.clone();
        if ps.cluster > 0 {
            let radius: Vec<f64> = theta.widths().iter().map(|w| w * ps.radius).collect();
            let around = BoxRegion::around(&anchor_x, &radius)?;
            let mut rng = ChaCha8Rng::seed_from_u64(ps.seed.unwrap_or(0));
            starts.extend((0..ps.cluster).map(|_| around.sample(&mut rng)));
        }
        let window = ps.window.unwrap_or((0, steps));
        let preds = predict_batch(&anchor, model.as_model(), &starts, window)?;
        self.write_with("anchor.csv", |w| anchor.write_csv(w))?;
        self.write_with("predictions.csv", |w| write_predictions_csv(w, &preds))?;
        self.write_with("displacement.csv", |w| {
            writeln!(w, "start,step,time,displacement")?;
            for (k, p) in preds.iter().enumerate() {
                for (i, d) in p.displacement(&anchor).iter().enumerate() {
                    let s = window.0 + i;
                    writeln!(w, "{k},{s},{},{d}", s as f64 * h)?;
                }
            }
            Ok(())
        })?;
        let mean_v = starts.iter().map(|s| norm(&sub(s, &anchor_x))).sum::<f64>() / starts.len() as f64;
        let mut summary = json!({"anchor": anchor_x, "window": window, "starts": starts.len(), "mean_v_norm": mean_v});
        if ps.check {
            let mut errors = Vec::with_capacity(preds.len());
            for p in &preds {
                let actual = simulate(&self.sys, &p.start, window.1, h)?;
                let e = p
                    .states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| dist(s, actual.state(window.0 + i)))
                    .sum::<f64>()
                    / p.states.len() as f64;
                errors.push(e);
            }
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            summary["mean_error"] = json!(mean);
            summary["errors"] = json!(errors);
        }
        self.write_json("predict.json", &summary)
    }
}

//! Supervised records for `Φ` and `Φ⁻¹` built from sampled trajectories.
//!
//! Every sampled state is the start of a (virtual) trajectory: the suffix of
//! the sampled sequence from that state on. For two sampled states
//! `p = ξ(a, j·h)` and `q = ξ(b, j'·h)` and a duration `i·h` that both
//! suffixes cover,
//!
//! ```text
//! forward:  x0 = p,          v = q − p,                    target = ξ(q, ih) − ξ(p, ih)
//! inverse:  x0 = ξ(p, ih),   v = ξ(q, ih) − ξ(p, ih),      target = q − p
//! ```
//!
//! Both targets are differences of stored corpus states, so every record can
//! be re-checked exactly against the corpus.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::net::Samples;
use crate::sim::{simulate, Trajectory};
use crate::{BoxRegion, Error, Result, SystemSpec};

/// Budget used when a configuration does not set one.
pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Forward,
    Inverse,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Forward => "forward",
            RecordKind::Inverse => "inverse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(RecordKind::Forward),
            "inverse" => Ok(RecordKind::Inverse),
            other => Err(Error::Parse(format!("unknown record kind `{other}`"))),
        }
    }
}

/// Which state pairs are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Any two sampled states, at any offsets.
    #[default]
    CrossOffset,
    /// Only states of different trajectories at the same offset.
    SameOffset,
}

/// Where a record came from: states `(a, j)` and `(b, jp)` of the corpus and
/// a duration of `steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Origin {
    pub a: usize,
    pub j: usize,
    pub b: usize,
    pub jp: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensRecord {
    pub x0: Vec<f64>,
    pub v: Vec<f64>,
    /// Duration in seconds.
    pub t: f64,
    pub target: Vec<f64>,
    pub kind: RecordKind,
    pub origin: Option<Origin>,
}

impl SensRecord {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Network input `(x0, v, t)`.
    pub fn input(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.dim() + 1);
        x.extend_from_slice(&self.x0);
        x.extend_from_slice(&self.v);
        x.push(self.t);
        x
    }
}

/// Sampled trajectories of one system at one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub system: String,
    pub h: f64,
    pub trajectories: Vec<Trajectory>,
}

impl Corpus {
    pub fn dim(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::dim)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// `n` trajectories of `steps` steps from initial states drawn uniformly from
/// `init_set`.
pub fn generate_corpus(
    sys: &SystemSpec,
    init_set: &BoxRegion,
    n: usize,
    steps: usize,
    h: f64,
    seed: u64,
) -> Result<Corpus> {
    if n < 2 {
        return Err(Error::Config(format!("corpus needs at least 2 trajectories, got {n}")));
    }
    if init_set.dim() != sys.dim() {
        return Err(Error::dim("initial set", sys.dim(), init_set.dim()));
    }
    if !init_set.is_subset_of(sys.domain()) {
        return Err(Error::Config(format!(
            "initial set is not inside the domain of `{}`",
            sys.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..n).map(|_| init_set.sample(&mut rng)).collect();
    generate_corpus_from(sys, &starts, steps, h)
}

/// Trajectories from explicit initial states.
pub fn generate_corpus_from(
    sys: &SystemSpec,
    starts: &[Vec<f64>],
    steps: usize,
    h: f64,
) -> Result<Corpus> {
    if starts.len() < 2 {
        return Err(Error::Config(format!(
            "corpus needs at least 2 trajectories, got {}",
            starts.len()
        )));
    }
    let trajectories = starts
        .par_iter()
        .map(|x0| simulate(sys, x0, steps, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        system: sys.name().to_string(),
        h,
        trajectories,
    })
}

/// Per-feature `(min, max)` ranges mapping features onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub output_min: Vec<f64>,
    pub output_max: Vec<f64>,
}

fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl Normalization {
    pub fn fit(records: &[SensRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Config("cannot fit normalization on no records".into()))?;
        let n_in = 2 * first.dim() + 1;
        let n_out = first.dim();
        let mut norm = Normalization {
            input_min: vec![f64::INFINITY; n_in],
            input_max: vec![f64::NEG_INFINITY; n_in],
            output_min: vec![f64::INFINITY; n_out],
            output_max: vec![f64::NEG_INFINITY; n_out],
        };
        for r in records {
            for (k, x) in r.input().into_iter().enumerate() {
                norm.input_min[k] = norm.input_min[k].min(x);
                norm.input_max[k] = norm.input_max[k].max(x);
            }
            for (k, y) in r.target.iter().enumerate() {
                norm.output_min[k] = norm.output_min[k].min(*y);
                norm.output_max[k] = norm.output_max[k].max(*y);
            }
        }
        Ok(norm)
    }

    pub fn input_width(&self) -> usize {
        self.input_min.len()
    }

    pub fn output_width(&self) -> usize {
        self.output_min.len()
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| to_unit(*v, self.input_min[k], self.input_max[k]))
            .collect()
    }

    pub fn normalize_output(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, v)| to_unit(*v, self.output_min[k], self.output_max[k]))
            .collect()
    }

    pub fn denormalize_output(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, v)| self.output_min[k] + v * (self.output_max[k] - self.output_min[k]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SensRecord>,
    pub system: String,
    pub h: f64,
    pub kind: RecordKind,
    pub dim: usize,
    pub seed: u64,
    /// Fitted on training records by [`Dataset::split`].
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordConfig {
    pub kind: RecordKind,
    pub budget: usize,
    pub seed: u64,
    pub pairing: Pairing,
}

impl RecordConfig {
    pub fn new(kind: RecordKind, budget: usize, seed: u64) -> Self {
        Self {
            kind,
            budget,
            seed,
            pairing: Pairing::CrossOffset,
        }
    }
}

/// Flat index over all sampled states of a corpus.
struct StateIndex {
    /// (trajectory, offset, remaining steps)
    entries: Vec<(usize, usize, usize)>,
}

impl StateIndex {
    fn new(corpus: &Corpus) -> Self {
        let mut entries = Vec::new();
        for (a, t) in corpus.trajectories.iter().enumerate() {
            let k = t.steps();
            for j in 0..=k {
                entries.push((a, j, k - j));
            }
        }
        Self { entries }
    }
}

/// Number of candidate `(pair, duration)` combinations, counting pairs by
/// position (value-equal pairs included).
pub fn candidate_count(corpus: &Corpus, pairing: Pairing) -> u128 {
    match pairing {
        Pairing::CrossOffset => {
            let mut rem: Vec<u128> = StateIndex::new(corpus)
                .entries
                .iter()
                .map(|e| e.2 as u128)
                .collect();
            rem.sort_unstable();
            let s = rem.len() as u128;
            // Σ over ordered pairs of min(r_p, r_q) = 2 Σ_i r_(i) · #{later elements}
            rem.iter()
                .enumerate()
                .map(|(i, r)| 2 * r * (s - 1 - i as u128))
                .sum()
        }
        Pairing::SameOffset => {
            let trajs = &corpus.trajectories;
            let mut total = 0u128;
            for (a, ta) in trajs.iter().enumerate() {
                for (b, tb) in trajs.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let k = ta.steps().min(tb.steps()) as u128;
                    // offsets j = 0..k each contribute min remaining = (k_a − j) ∧ (k_b − j)
                    total += k * (k + 1) / 2;
                }
            }
            total
        }
    }
}

fn build_record(corpus: &Corpus, o: Origin, kind: RecordKind) -> Option<SensRecord> {
    let ta = &corpus.trajectories[o.a];
    let tb = &corpus.trajectories[o.b];
    let p = ta.state(o.j);
    let q = tb.state(o.jp);
    if p == q {
        return None;
    }
    let pt = ta.state(o.j + o.steps);
    let qt = tb.state(o.jp + o.steps);
    let t = o.steps as f64 * corpus.h;
    let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a - b).collect() };
    let rec = match kind {
        RecordKind::Forward => SensRecord {
            x0: p.to_vec(),
            v: diff(q, p),
            t,
            target: diff(qt, pt),
            kind,
            origin: Some(o),
        },
        RecordKind::Inverse => SensRecord {
            x0: pt.to_vec(),
            v: diff(qt, pt),
            t,
            target: diff(q, p),
            kind,
            origin: Some(o),
        },
    };
    Some(rec)
}

fn enumerate_origins(corpus: &Corpus, pairing: Pairing) -> Vec<Origin> {
    let trajs = &corpus.trajectories;
    let mut out = Vec::new();
    for (a, ta) in trajs.iter().enumerate() {
        for j in 0..=ta.steps() {
            for (b, tb) in trajs.iter().enumerate() {
                let offsets: Box<dyn Iterator<Item = usize>> = match pairing {
                    Pairing::CrossOffset => Box::new(0..=tb.steps()),
                    Pairing::SameOffset if a != b && j <= tb.steps() => Box::new(j..=j),
                    Pairing::SameOffset => Box::new(0..0),
                };
                for jp in offsets {
                    if a == b && j == jp {
                        continue;
                    }
                    let max = (ta.steps() - j).min(tb.steps() - jp);
                    for steps in 1..=max {
                        out.push(Origin { a, j, b, jp, steps });
                    }
                }
            }
        }
    }
    out
}

fn sample_origins(corpus: &Corpus, cfg: &RecordConfig) -> Vec<Origin> {
    let index = StateIndex::new(corpus);
    let max_rem = index.entries.iter().map(|e| e.2).max().unwrap_or(0);
    let trajs = &corpus.trajectories;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = HashSet::with_capacity(cfg.budget);
    let mut out = Vec::with_capacity(cfg.budget);
    let max_attempts = 1000 * cfg.budget.max(1000);
    let mut attempts = 0;
    // Rejection sampling: every (p, q, steps) triple is proposed with equal
    // probability, so accepted records are uniform over the valid set.
    while out.len() < cfg.budget && attempts < max_attempts {
        attempts += 1;
        let (a, j, b, jp) = match cfg.pairing {
            Pairing::CrossOffset => {
                let p = index.entries[rng.random_range(0..index.entries.len())];
                let q = index.entries[rng.random_range(0..index.entries.len())];
                (p.0, p.1, q.0, q.1)
            }
            Pairing::SameOffset => {
                let a = rng.random_range(0..trajs.len());
                let b = rng.random_range(0..trajs.len());
                let j = rng.random_range(0..=max_rem);
                (a, j, b, j)
            }
        };
        if (a == b && j == jp) || j > trajs[a].steps() || jp > trajs[b].steps() {
            continue;
        }
        let steps = rng.random_range(1..=max_rem.max(1));
        if steps > (trajs[a].steps() - j).min(trajs[b].steps() - jp) {
            continue;
        }
        let o = Origin { a, j, b, jp, steps };
        if trajs[a].state(j) == trajs[b].state(jp) || !seen.insert(o) {
            continue;
        }
        out.push(o);
    }
    out
}

/// Builds at most `budget` records of one kind from a corpus.
///
/// When all candidates fit in the budget they are enumerated in canonical
/// order; otherwise `budget` distinct records are drawn uniformly with the
/// configured seed.
pub fn make_records(corpus: &Corpus, cfg: &RecordConfig) -> Result<Dataset> {
    if corpus.is_empty() {
        return Err(Error::Config("corpus is empty".into()));
    }
    if cfg.budget == 0 {
        return Err(Error::Config("record budget must be ≥ 1".into()));
    }
    let dim = corpus.dim();
    if corpus.trajectories.iter().any(|t| t.dim() != dim) {
        return Err(Error::Config("corpus trajectories differ in dimension".into()));
    }
    let origins = if candidate_count(corpus, cfg.pairing) <= cfg.budget as u128 {
        enumerate_origins(corpus, cfg.pairing)
    } else {
        sample_origins(corpus, cfg)
    };
    let records: Vec<SensRecord> = origins
        .into_iter()
        .filter_map(|o| build_record(corpus, o, cfg.kind))
        .take(cfg.budget)
        .collect();
    Ok(Dataset {
        records,
        system: corpus.system.clone(),
        h: corpus.h,
        kind: cfg.kind,
        dim,
        seed: cfg.seed,
        normalization: None,
    })
}

/// Re-checks a record's defining identity against the corpus, exactly.
pub fn verify_record(corpus: &Corpus, r: &SensRecord) -> bool {
    let Some(o) = r.origin else { return false };
    let Some(ta) = corpus.trajectories.get(o.a) else { return false };
    let Some(tb) = corpus.trajectories.get(o.b) else { return false };
    if o.steps == 0 || o.j + o.steps > ta.steps() || o.jp + o.steps > tb.steps() {
        return false;
    }
    let (x1, x2) = (ta.state(o.j), tb.state(o.jp));
    let (y1, y2) = (ta.state(o.j + o.steps), tb.state(o.jp + o.steps));
    let t_ok = r.t == o.steps as f64 * corpus.h;
    let eq_diff = |got: &[f64], a: &[f64], b: &[f64]| {
        got.len() == a.len() && got.iter().zip(a.iter().zip(b)).all(|(g, (x, y))| *g == x - y)
    };
    t_ok && match r.kind {
        RecordKind::Forward => r.x0 == x1 && eq_diff(&r.v, x2, x1) && eq_diff(&r.target, y2, y1),
        RecordKind::Inverse => r.x0 == y1 && eq_diff(&r.v, y2, y1) && eq_diff(&r.target, x2, x1),
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Seeded shuffle split into `(train, test)`; the normalization is fitted
    /// on the training part and copied to both.
    pub fn split(&self, test_fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction must be in (0, 1), got {test_fraction}"
            )));
        }
        if self.len() < 10 {
            return Err(Error::Config(format!(
                "need at least 10 records to split, have {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ SPLIT_SALT);
        order.shuffle(&mut rng);
        let n_test = ((self.len() as f64 * test_fraction).round() as usize).clamp(1, self.len() - 1);
        let (test_idx, train_idx) = order.split_at(n_test);
        let pick = |idx: &[usize]| -> Vec<SensRecord> {
            idx.iter().map(|&i| self.records[i].clone()).collect()
        };
        let train_records = pick(train_idx);
        let norm = Normalization::fit(&train_records)?;
        let mut train = self.with_records(train_records);
        let mut test = self.with_records(pick(test_idx));
        train.normalization = Some(norm.clone());
        test.normalization = Some(norm);
        Ok((train, test))
    }

    fn with_records(&self, records: Vec<SensRecord>) -> Dataset {
        Dataset {
            records,
            system: self.system.clone(),
            h: self.h,
            kind: self.kind,
            dim: self.dim,
            seed: self.seed,
            normalization: self.normalization.clone(),
        }
    }

    /// Inputs and targets mapped through the dataset's normalization.
    pub fn normalized_samples(&self) -> Result<Samples> {
        let norm = self
            .normalization
            .as_ref()
            .ok_or_else(|| Error::Config("dataset has no normalization; split it first".into()))?;
        let mut s = Samples {
            input_width: 2 * self.dim + 1,
            target_width: self.dim,
            inputs: Vec::with_capacity(self.len() * (2 * self.dim + 1)),
            targets: Vec::with_capacity(self.len() * self.dim),
        };
        for r in &self.records {
            s.push(&norm.normalize_input(&r.input()), &norm.normalize_output(&r.target));
        }
        Ok(s)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            system: self.system.clone(),
            h: self.h,
            seed: self.seed,
            kind: self.kind,
            dim: self.dim,
            count: self.len(),
            normalization: self.normalization.clone(),
        }
    }

    /// CSV with columns `x0_1..x0_n, v_1..v_n, t, y_1..y_n, kind`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim;
        let mut header: Vec<String> = (1..=n).map(|i| format!("x0_{i}")).collect();
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.push("t".into());
        header.extend((1..=n).map(|i| format!("y_{i}")));
        header.push("kind".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut cells: Vec<String> = r.input().iter().map(f64::to_string).collect();
            cells.extend(r.target.iter().map(f64::to_string));
            cells.push(r.kind.as_str().into());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Reads records written by [`Dataset::write_csv`]; metadata comes from
    /// the sidecar.
    pub fn read_csv<R: BufRead>(r: R, meta: &DatasetMeta) -> Result<Dataset> {
        let n = meta.dim;
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset csv".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        if header.split(',').count() != 3 * n + 2 {
            return Err(Error::Parse(format!("dataset header does not match dimension {n}")));
        }
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 * n + 2 {
                return Err(Error::Parse(format!("row {}: wrong column count", lineno + 2)));
            }
            let nums = cells[..3 * n + 1]
                .iter()
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let kind = RecordKind::parse(cells[3 * n + 1].trim())?;
            records.push(SensRecord {
                x0: nums[..n].to_vec(),
                v: nums[n..2 * n].to_vec(),
                t: nums[2 * n],
                target: nums[2 * n + 1..].to_vec(),
                kind,
                origin: None,
            });
        }
        Ok(meta.dataset(records))
    }

    /// Little-endian binary: magic, dimension, kind tag, count, then
    /// `3n + 1` doubles per record.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&[match self.kind {
            RecordKind::Forward => 0u8,
            RecordKind::Inverse => 1u8,
        }])?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for r in &self.records {
            for v in r.input().iter().chain(&r.target) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, meta: &DatasetMeta) -> Result<Dataset> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let header = 8 + 4 + 1 + 8;
        if buf.len() < header || &buf[..8] != DATASET_MAGIC {
            return Err(Error::Parse("not a dataset file".into()));
        }
        let n = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let kind = match buf[12] {
            0 => RecordKind::Forward,
            1 => RecordKind::Inverse,
            k => return Err(Error::Parse(format!("bad kind tag {k}"))),
        };
        let count = u64::from_le_bytes(buf[13..21].try_into().unwrap()) as usize;
        if n != meta.dim || kind != meta.kind {
            return Err(Error::Parse("dataset file disagrees with its sidecar".into()));
        }
        let width = 3 * n + 1;
        let body = &buf[header..];
        if body.len() != count * width * 8 {
            return Err(Error::Parse(format!(
                "dataset body has {} bytes, expected {}",
                body.len(),
                count * width * 8
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let records = values
            .chunks_exact(width)
            .map(|row| SensRecord {
                x0: row[..n].to_vec(),
                v: row[n..2 * n].to_vec(),
                t: row[2 * n],
                target: row[2 * n + 1..].to_vec(),
                kind,
                origin: None,
            })
            .collect();
        Ok(meta.dataset(records))
    }

    /// Writes `<stem>.bin` and the `<stem>.json` sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let bin = dir.join(format!("{stem}.bin"));
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?,
        );
        self.write_binary(&mut f).map_err(|e| Error::io(&bin, e))?;
        f.flush().map_err(|e| Error::io(&bin, e))?;
        let side = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.meta()).expect("meta serializes");
        std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Dataset> {
        let side = dir.join(format!("{stem}.json"));
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: DatasetMeta =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let bin = dir.join(format!("{stem}.bin"));
        let f = std::fs::File::open(&bin).map_err(|e| Error::io(&bin, e))?;
        Dataset::read_binary(std::io::BufReader::new(f), &meta)
    }
}

const DATASET_MAGIC: &[u8; 8] = b"NSDSET01";

const SPLIT_SALT: u64 = 0x5eed_0f_0511;

/// JSON sidecar of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub system: String,
    pub h: f64,
    pub seed: u64,
    pub kind: RecordKind,
    pub dim: usize,
    pub count: usize,
    pub normalization: Option<Normalization>,
}

impl DatasetMeta {
    fn dataset(&self, records: Vec<SensRecord>) -> Dataset {
        Dataset {
            records,
            system: self.system.clone(),
            h: self.h,
            kind: self.kind,
            dim: self.dim,
            seed: self.seed,
            normalization: self.normalization.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin_system;
    use crate::sim::Direction;

    fn toy_corpus(trajs: &[&[f64]]) -> Corpus {
        Corpus {
            system: "toy".into(),
            h: 0.5,
            trajectories: trajs
                .iter()
                .map(|xs| Trajectory::from_states(0.5, xs.iter().map(|x| vec![*x]).collect(), Direction::Forward))
                .collect(),
        }
    }

    #[test]
    fn same_offset_pairs_of_two_short_trajectories() {
        let c = toy_corpus(&[&[0.0, 1.0, 2.0], &[10.0, 12.0, 15.0]]);
        let cfg = RecordConfig { pairing: Pairing::SameOffset, ..RecordConfig::new(RecordKind::Forward, 100, 0) };
        let ds = make_records(&c, &cfg).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(candidate_count(&c, Pairing::SameOffset), 6);
        assert!(ds.records.iter().all(|r| verify_record(&c, r)));
    }

    #[test]
    fn forward_and_inverse_targets_by_hand() {
        let c = toy_corpus(&[&[0.0, 1.0], &[10.0, 12.0]]);
        let cfg = RecordConfig { pairing: Pairing::SameOffset, ..RecordConfig::new(RecordKind::Forward, 100, 0) };
        let fwd = make_records(&c, &cfg).unwrap();
        // p = 0, q = 10, one step: x0 = 0, v = 10, target = 12 − 1
        assert_eq!(fwd.records[0].x0, vec![0.0]);
        assert_eq!(fwd.records[0].v, vec![10.0]);
        assert_eq!(fwd.records[0].target, vec![11.0]);
        assert_eq!(fwd.records[0].t, 0.5);
        let inv = make_records(&c, &RecordConfig { kind: RecordKind::Inverse, ..cfg }).unwrap();
        assert_eq!(inv.records[0].x0, vec![1.0]);
        assert_eq!(inv.records[0].v, vec![11.0]);
        assert_eq!(inv.records[0].target, vec![10.0]);
    }

    #[test]
    fn equal_states_are_never_paired() {
        let c = toy_corpus(&[&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]]);
        let ds = make_records(&c, &RecordConfig::new(RecordKind::Forward, 1000, 0)).unwrap();
        assert!(!ds.is_empty());
        assert!(ds.records.iter().all(|r| r.v.iter().any(|x| *x != 0.0)));
    }

    #[test]
    fn sampling_respects_the_budget_and_is_seeded() {
        let sys = builtin_system("Vanderpol").unwrap();
        let c = generate_corpus(&sys, &sys.meta().init_set, 3, 50, 0.01, 1).unwrap();
        let cfg = RecordConfig::new(RecordKind::Inverse, 500, 9);
        let a = make_records(&c, &cfg).unwrap();
        let b = make_records(&c, &cfg).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a, b);
        let origins: HashSet<Origin> = a.records.iter().map(|r| r.origin.unwrap()).collect();
        assert_eq!(origins.len(), 500);
        assert!(a.records.iter().all(|r| verify_record(&c, r)));
    }

    #[test]
    fn corpus_needs_two_trajectories() {
        let sys = builtin_system("Vanderpol").unwrap();
        let theta = sys.meta().init_set.clone();
        assert!(matches!(generate_corpus(&sys, &theta, 1, 10, 0.01, 0), Err(Error::Config(_))));
        let c = generate_corpus(&sys, &theta, 30, 500, 0.01, 0).unwrap();
        assert_eq!(c.len(), 30);
        assert!(c.trajectories.iter().all(|t| t.states().len() == 501));
        assert_eq!(c, generate_corpus(&sys, &theta, 30, 500, 0.01, 0).unwrap());
    }

    fn thousand() -> Dataset {
        let records = (0..1000)
            .map(|i| SensRecord {
                x0: vec![i as f64],
                v: vec![1.0],
                t: 0.1,
                target: vec![2.0 * i as f64],
                kind: RecordKind::Forward,
                origin: None,
            })
            .collect();
        Dataset { records, system: "toy".into(), h: 0.1, kind: RecordKind::Forward, dim: 1, seed: 4, normalization: None }
    }

    #[test]
    fn split_sizes_and_normalization() {
        let ds = thousand();
        let (train, test) = ds.split(0.1).unwrap();
        assert_eq!((train.len(), test.len()), (900, 100));
        assert_eq!(ds.split(0.1).unwrap(), (train.clone(), test.clone()));
        let mut seen: Vec<f64> = train.records.iter().chain(&test.records).map(|r| r.x0[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..1000).map(|i| i as f64).collect::<Vec<_>>());
        let s = train.normalized_samples().unwrap();
        assert!(s.inputs.iter().chain(&s.targets).all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(test.normalization, train.normalization);
    }

    #[test]
    fn bad_splits_are_config_errors() {
        assert!(matches!(thousand().split(1.0), Err(Error::Config(_))));
        assert!(matches!(thousand().split(0.0), Err(Error::Config(_))));
        let mut small = thousand();
        small.records.truncate(9);
        assert!(matches!(small.split(0.1), Err(Error::Config(_))));
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let (train, _) = thousand().split(0.1).unwrap();
        let mut bin = Vec::new();
        train.write_binary(&mut bin).unwrap();
        let back = Dataset::read_binary(&bin[..], &train.meta()).unwrap();
        assert_eq!(back.records.len(), train.len());
        assert!(back.records.iter().zip(&train.records).all(|(a, b)| a.input() == b.input() && a.target == b.target));
        assert!(matches!(Dataset::read_binary(&bin[..bin.len() - 3], &train.meta()), Err(Error::Parse(_))));

        let mut csv = Vec::new();
        train.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x0_1,v_1,t,y_1,kind\n"));
        let back = Dataset::read_csv(text.as_bytes(), &train.meta()).unwrap();
        assert!(back.records.iter().zip(&train.records).all(|(a, b)| a.input() == b.input() && a.target == b.target));
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let (train, _) = thousand().split(0.2).unwrap();
        train.save(dir.path(), "train").unwrap();
        let back = Dataset::load(dir.path(), "train").unwrap();
        assert_eq!(back.normalization, train.normalization);
        assert_eq!(back.len(), train.len());
    }
}

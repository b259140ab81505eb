//! Searching for trajectories that enter an unsafe box.
//!
//! Three searches share one report type:
//!
//! - [`falsify_inverse`] aims trajectories at random points of the unsafe box
//!   with the inverse-sensitivity model;
//! - [`falsify_forward_density`] predicts a cluster of neighbours of an anchor
//!   trajectory with the forward-sensitivity model and greedily re-anchors at
//!   the most promising one;
//! - [`falsify_random_baseline`] samples initial states uniformly.
//!
//! Only real simulations count as samples. Every probed initial state is kept
//! in the report's profile together with the minimum distance of its
//! trajectory to the unsafe box.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::explore::{predict_batch, reach_target, ReachConfig};
use crate::net::SensitivityModel;
use crate::sim::{simulate, Trajectory};
use crate::{BoxRegion, Error, Result, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub unsafe_set: BoxRegion,
    /// Number of steps simulated per probe.
    pub horizon: usize,
    /// Inclusive step range in which entry counts; the whole horizon if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
}

impl SafetySpec {
    pub fn new(unsafe_set: BoxRegion, horizon: usize) -> Self {
        Self { unsafe_set, horizon, window: None }
    }

    pub fn with_window(mut self, first: usize, last: usize) -> Self {
        self.window = Some((first, last));
        self
    }

    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        if self.unsafe_set.dim() != sys.dim() {
            return Err(Error::dim("unsafe set", sys.dim(), self.unsafe_set.dim()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be ≥ 1".into()));
        }
        if let Some((a, b)) = self.window {
            if a > b || b > self.horizon {
                return Err(Error::Config(format!(
                    "time window [{a}, {b}] is not inside [0, {}]",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> (usize, usize) {
        self.window.unwrap_or((0, self.horizon))
    }

    /// Minimum distance to the unsafe box over the window and the first step
    /// attaining it.
    pub fn min_distance(&self, traj: &Trajectory) -> (f64, usize) {
        let (a, b) = self.steps();
        let b = b.min(traj.steps());
        let mut best = (f64::INFINITY, a);
        for s in a..=b {
            let d = self.unsafe_set.distance(traj.state(s));
            if d < best.0 {
                best = (d, s);
            }
        }
        best
    }

    /// First step in the window at which the trajectory is inside the box.
    pub fn first_entry(&self, traj: &Trajectory) -> Option<usize> {
        let (a, b) = self.steps();
        (a..=b.min(traj.steps())).find(|&s| self.unsafe_set.contains(traj.state(s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Falsified,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Entered,
    Threshold,
    IterationCap,
    TargetsExhausted,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub x0: Vec<f64>,
    pub step: usize,
}

/// A probed initial state and its trajectory's minimum distance to the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct ProfileEntry {
    pub x: Vec<f64>,
    pub distance: f64,
}

impl From<ProfileEntry> for Vec<f64> {
    fn from(e: ProfileEntry) -> Self {
        let mut v = e.x;
        v.push(e.distance);
        v
    }
}

impl TryFrom<Vec<f64>> for ProfileEntry {
    type Error = String;

    fn try_from(mut v: Vec<f64>) -> std::result::Result<Self, String> {
        let distance = v.pop().ok_or("empty profile row")?;
        Ok(ProfileEntry { x: v, distance })
    }
}

/// Predicted neighbours of one density-search anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityIteration {
    pub anchor: ProfileEntry,
    pub window: (usize, usize),
    /// Cluster starts with their predicted distance to the box.
    pub predicted: Vec<ProfileEntry>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub outcome: Outcome,
    pub counterexample: Option<Counterexample>,
    pub samples_used: usize,
    pub stop: StopReason,
    pub profile: Vec<ProfileEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<DensityIteration>,
}

impl FalsifyReport {
    fn new() -> Self {
        Self {
            outcome: Outcome::Exhausted,
            counterexample: None,
            samples_used: 0,
            stop: StopReason::Budget,
            profile: Vec::new(),
            iterations: Vec::new(),
        }
    }

    /// Simulates `x0`, records it, and returns the trajectory and whether it
    /// entered the box.
    fn probe(&mut self, sys: &SystemSpec, spec: &SafetySpec, x0: &[f64], h: f64) -> Result<(Trajectory, bool)> {
        let traj = simulate(sys, x0, spec.horizon, h)?;
        self.samples_used += 1;
        let (distance, _) = spec.min_distance(&traj);
        self.profile.push(ProfileEntry { x: x0.to_vec(), distance });
        let entered = match spec.first_entry(&traj) {
            Some(step) => {
                self.outcome = Outcome::Falsified;
                self.stop = StopReason::Entered;
                self.counterexample = Some(Counterexample { x0: x0.to_vec(), step });
                true
            }
            None => false,
        };
        Ok((traj, entered))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `x1..xn,distance`
    pub fn write_profile_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_profile_csv(w, &self.profile)
    }
}

pub fn write_profile_csv<W: Write>(mut w: W, profile: &[ProfileEntry]) -> std::io::Result<()> {
    let n = profile.first().map_or(0, |e| e.x.len());
    let cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(w, "{},distance", cols.join(","))?;
    for e in profile {
        let xs: Vec<String> = e.x.iter().map(f64::to_string).collect();
        writeln!(w, "{},{}", xs.join(","), e.distance)?;
    }
    Ok(())
}

/// Re-simulates a counterexample and checks that it is inside the unsafe box
/// at the reported step.
pub fn verify_counterexample(sys: &SystemSpec, spec: &SafetySpec, cex: &Counterexample, h: f64) -> Result<bool> {
    let traj = simulate(sys, &cex.x0, cex.step, h)?;
    Ok(spec.unsafe_set.contains(traj.last()))
}

/// Minimum distance to the unsafe box of the trajectory from every start.
pub fn distance_profile(sys: &SystemSpec, spec: &SafetySpec, starts: &[Vec<f64>], h: f64) -> Result<Vec<ProfileEntry>> {
    use rayon::prelude::*;
    spec.validate(sys)?;
    starts
        .par_iter()
        .map(|x| {
            let traj = simulate(sys, x, spec.horizon, h)?;
            Ok(ProfileEntry { x: x.clone(), distance: spec.min_distance(&traj).0 })
        })
        .collect()
}

fn unsafe_in_domain(sys: &SystemSpec, spec: &SafetySpec) -> Result<BoxRegion> {
    spec.validate(sys)?;
    spec.unsafe_set
        .intersection(sys.domain())
        .ok_or_else(|| Error::Config("unsafe set does not meet the domain".into()))
}

fn check_theta(sys: &SystemSpec, theta: &BoxRegion) -> Result<()> {
    if theta.dim() != sys.dim() {
        return Err(Error::dim("initial set", sys.dim(), theta.dim()));
    }
    if !theta.is_subset_of(sys.domain()) {
        return Err(Error::Config("initial set is not inside the domain".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSearchConfig {
    /// Number of random targets drawn in the unsafe box.
    pub targets: usize,
    pub epsilon: f64,
    pub iterations: usize,
    /// Step stride of target times when the spec has no window.
    pub stride: usize,
    pub seed: u64,
}

impl Default for InverseSearchConfig {
    fn default() -> Self {
        Self {
            targets: 10,
            epsilon: 1e-3,
            iterations: 10,
            stride: 10,
            seed: 0,
        }
    }
}

fn target_times(spec: &SafetySpec, stride: usize) -> Vec<usize> {
    match spec.window {
        Some((a, b)) => (a.max(1)..=b).collect(),
        None => (1..=spec.horizon)
            .filter(|s| s % stride.max(1) == 0)
            .collect(),
    }
}

/// Aims at uniformly drawn states of the unsafe box with [`reach_target`],
/// trying each target time in turn, and stops at the first trajectory that
/// enters the box. Every candidate initial state of every run is probed,
/// after projection into `theta`.
pub fn falsify_inverse(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    spec: &SafetySpec,
    theta: &BoxRegion,
    h: f64,
    cfg: &InverseSearchConfig,
) -> Result<FalsifyReport> {
    let targets = sample_targets(sys, spec, cfg.targets, cfg.seed)?;
    falsify_inverse_with_targets(sys, inv, spec, theta, h, cfg, &targets)
}

/// Uniform states of the part of the unsafe box inside the domain.
pub fn sample_targets(sys: &SystemSpec, spec: &SafetySpec, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Config("target count must be ≥ 1".into()));
    }
    let region = unsafe_in_domain(sys, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| region.sample(&mut rng)).collect())
}

/// [`falsify_inverse`] with caller-supplied targets.
pub fn falsify_inverse_with_targets(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    spec: &SafetySpec,
    theta: &BoxRegion,
    h: f64,
    cfg: &InverseSearchConfig,
    targets: &[Vec<f64>],
) -> Result<FalsifyReport> {
    unsafe_in_domain(sys, spec)?;
    check_theta(sys, theta)?;
    let mut report = FalsifyReport::new();
    report.stop = StopReason::TargetsExhausted;
    let times = target_times(spec, cfg.stride);
    for (k, z) in targets.iter().enumerate() {
        for &s in &times {
            let rc = ReachConfig {
                epsilon: cfg.epsilon,
                iterations: cfg.iterations,
                restarts: 1,
                seed: cfg.seed.wrapping_add(1 + k as u64),
            };
            let r = reach_target(sys, inv, z, s, h, theta, &rc)?;
            for it in &r.iterates {
                if report.probe(sys, spec, &theta.clamp(&it.x), h)?.1 {
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityMapConfig {
    pub targets: usize,
    pub epsilon: f64,
    pub iterations: usize,
    /// Target time in steps; the spec window's end, or the horizon, if unset.
    pub steps: Option<usize>,
    pub seed: u64,
}

impl Default for DensityMapConfig {
    fn default() -> Self {
        Self {
            targets: 20,
            epsilon: 1e-3,
            iterations: 5,
            steps: None,
            seed: 0,
        }
    }
}

/// Runs inverse-sensitivity probing toward random unsafe states without
/// stopping at entry, and returns every probed initial state with its
/// distance to the box.
pub fn inverse_density_map(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    spec: &SafetySpec,
    theta: &BoxRegion,
    h: f64,
    cfg: &DensityMapConfig,
) -> Result<Vec<ProfileEntry>> {
    check_theta(sys, theta)?;
    let targets = sample_targets(sys, spec, cfg.targets, cfg.seed)?;
    let steps = cfg.steps.unwrap_or(spec.steps().1).max(1);
    let mut starts = Vec::new();
    for (k, z) in targets.iter().enumerate() {
        let rc = ReachConfig {
            epsilon: cfg.epsilon,
            iterations: cfg.iterations,
            restarts: 1,
            seed: cfg.seed.wrapping_add(1 + k as u64),
        };
        let r = reach_target(sys, inv, z, steps, h, theta, &rc)?;
        starts.extend(r.iterates.iter().map(|it| theta.clamp(&it.x)));
    }
    distance_profile(sys, spec, &starts, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySearchConfig {
    pub cluster_size: usize,
    pub iterations: usize,
    /// Stop once an anchor comes this close to the box.
    pub threshold: f64,
    /// Cluster half-width as a fraction of Θ's width per axis.
    pub radius: f64,
    /// Half-width in steps of the prediction window around the anchor's
    /// closest approach.
    pub window_radius: usize,
    pub seed: u64,
}

impl Default for DensitySearchConfig {
    fn default() -> Self {
        Self {
            cluster_size: 50,
            iterations: 20,
            threshold: 0.0,
            radius: 0.05,
            window_radius: 25,
            seed: 0,
        }
    }
}

/// Greedy anchor search with forward-sensitivity predictions.
///
/// Each iteration simulates the anchor, finds the steps where it comes
/// closest to the unsafe box, predicts a cluster of neighbours around the
/// anchor's start over those steps, and moves the anchor to the neighbour
/// predicted to come closest.
pub fn falsify_forward_density(
    sys: &SystemSpec,
    fwd: &dyn SensitivityModel,
    spec: &SafetySpec,
    theta: &BoxRegion,
    h: f64,
    cfg: &DensitySearchConfig,
) -> Result<FalsifyReport> {
    spec.validate(sys)?;
    check_theta(sys, theta)?;
    if cfg.cluster_size < 2 {
        return Err(Error::Config("cluster size must be ≥ 2".into()));
    }
    if fwd.dim() != sys.dim() {
        return Err(Error::dim("forward model", sys.dim(), fwd.dim()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = FalsifyReport::new();
    report.stop = StopReason::IterationCap;
    let radius: Vec<f64> = theta.widths().iter().map(|w| w * cfg.radius).collect();
    let mut x = theta.sample(&mut rng);
    for _ in 0..cfg.iterations.max(1) {
        let (anchor, entered) = report.probe(sys, spec, &x, h)?;
        if entered {
            return Ok(report);
        }
        let (d, closest) = spec.min_distance(&anchor);
        if d <= cfg.threshold {
            report.stop = StopReason::Threshold;
            return Ok(report);
        }
        let (lo, hi) = spec.steps();
        let window = (
            closest.saturating_sub(cfg.window_radius).max(lo),
            (closest + cfg.window_radius).min(hi).min(anchor.steps()),
        );
        let cluster_box = BoxRegion::around(&x, &radius)?
            .intersection(theta)
            .expect("anchor start lies in theta");
        let starts: Vec<Vec<f64>> = (0..cfg.cluster_size).map(|_| cluster_box.sample(&mut rng)).collect();
        let preds = predict_batch(&anchor, fwd, &starts, window)?;
        let predicted: Vec<ProfileEntry> = preds
            .iter()
            .map(|p| ProfileEntry {
                x: p.start.clone(),
                distance: p
                    .states
                    .iter()
                    .map(|s| spec.unsafe_set.distance(s))
                    .fold(f64::INFINITY, f64::min),
            })
            .collect();
        let chosen = predicted
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
            .map(|(i, _)| i)
            .expect("cluster is nonempty");
        x = predicted[chosen].x.clone();
        report.iterations.push(DensityIteration {
            anchor: ProfileEntry { x: anchor.initial().to_vec(), distance: d },
            window,
            predicted,
            chosen,
        });
    }
    Ok(report)
}

/// Uniform random initial states until one enters the box or the budget runs out.
pub fn falsify_random_baseline(
    sys: &SystemSpec,
    spec: &SafetySpec,
    theta: &BoxRegion,
    h: f64,
    budget: usize,
    seed: u64,
) -> Result<FalsifyReport> {
    spec.validate(sys)?;
    check_theta(sys, theta)?;
    if budget == 0 {
        return Err(Error::Config("budget must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FalsifyReport::new();
    for _ in 0..budget {
        let x = theta.sample(&mut rng);
        if report.probe(sys, spec, &x, h)?.1 {
            return Ok(report);
        }
    }
    Ok(report)
}

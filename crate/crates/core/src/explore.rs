//! Target reaching with a learned inverse sensitivity, and trajectory
//! prediction with a learned forward sensitivity.
//!
//! Times are given in steps of the integration step `h`; the models receive
//! `t = steps · h` in seconds.

use std::io::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{add, dist, norm, sub};
use crate::net::SensitivityModel;
use crate::sim::{simulate, Trajectory};
use crate::{BoxRegion, Error, Result, SystemSpec};

/// Passes with less than this relative improvement count as stalled.
const STALL_IMPROVEMENT: f64 = 0.01;
const STALL_PASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachConfig {
    /// Convergence radius around the target.
    pub epsilon: f64,
    /// Maximum number of correction passes.
    pub iterations: usize,
    /// Number of random starts; a new start is drawn after
    /// three stalled passes while starts remain.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            iterations: 10,
            restarts: 1,
            seed: 0,
        }
    }
}

impl ReachConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be ≥ 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub d_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    /// Best initial state found.
    pub x: Vec<f64>,
    pub d_a: f64,
    pub d_r: f64,
    pub converged: bool,
    /// Target time in steps.
    pub steps: usize,
    /// Every simulated candidate in order; entry 0 is the random start.
    pub iterates: Vec<Iterate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ReachResult {
    pub fn d_orig(&self) -> f64 {
        self.iterates[0].d_a
    }

    /// Best relative distance seen within the first `passes` correction passes.
    pub fn d_r_after(&self, passes: usize) -> f64 {
        let best = self.iterates[..(passes + 1).min(self.iterates.len())]
            .iter()
            .map(|it| it.d_a)
            .fold(f64::INFINITY, f64::min);
        relative(best, self.d_orig())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reach result serializes")
    }

    /// `pass,d_a,x1..xn`
    pub fn write_iterates_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.x.len();
        let cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        writeln!(w, "pass,d_a,{}", cols.join(","))?;
        for (i, it) in self.iterates.iter().enumerate() {
            let xs: Vec<String> = it.x.iter().map(f64::to_string).collect();
            writeln!(w, "{i},{},{}", it.d_a, xs.join(","))?;
        }
        Ok(())
    }
}

fn relative(d: f64, d_orig: f64) -> f64 {
    if d_orig > 0.0 {
        d / d_orig
    } else {
        0.0
    }
}

fn check_common(sys: &SystemSpec, z: &[f64], theta: &BoxRegion, model: &dyn SensitivityModel) -> Result<()> {
    let n = sys.dim();
    if z.len() != n {
        return Err(Error::dim("target", n, z.len()));
    }
    if theta.dim() != n {
        return Err(Error::dim("initial set", n, theta.dim()));
    }
    if model.dim() != n {
        return Err(Error::dim("inverse model", n, model.dim()));
    }
    if !theta.is_subset_of(sys.domain()) {
        return Err(Error::Config("initial set is not inside the domain".into()));
    }
    Ok(())
}

fn state_at(sys: &SystemSpec, x: &[f64], steps: usize, h: f64) -> Result<Vec<f64>> {
    Ok(simulate(sys, x, steps, h)?.last().to_vec())
}

/// Steers a random initial state from `theta` so that its trajectory passes
/// within `epsilon` of `z` after `steps` steps.
///
/// Each pass simulates the current candidate `x`, asks the inverse model for
/// the initial-state change that moves `ξ(x, t)` onto `z`, and applies it.
/// The candidate with the smallest distance is returned; all passes are kept
/// in `iterates`. Candidates leaving the domain are clamped back into it.
pub fn reach_target(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    z: &[f64],
    steps: usize,
    h: f64,
    theta: &BoxRegion,
    cfg: &ReachConfig,
) -> Result<ReachResult> {
    cfg.validate()?;
    check_common(sys, z, theta, inv)?;
    let domain = sys.domain();
    let t = steps as f64 * h;
    let mut warnings = Vec::new();
    if !domain.contains(z) {
        let msg = format!("target {z:?} lies outside the domain");
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = theta.sample(&mut rng);
    let mut y = state_at(sys, &x, steps, h)?;
    let mut d = dist(&y, z);
    let mut iterates = vec![Iterate { x: x.clone(), d_a: d }];
    let mut best = d;
    let mut stalled = 0;
    let mut starts = 1;

    for _ in 0..cfg.iterations {
        if best <= cfg.epsilon {
            break;
        }
        if stalled >= STALL_PASSES && starts < cfg.restarts {
            starts += 1;
            stalled = 0;
            x = theta.sample(&mut rng);
        } else {
            let v = sub(z, &y);
            let dx = inv.eval(&y, &v, t)?;
            let next = add(&x, &dx);
            x = domain.clamp(&next);
            if x != next {
                let msg = format!("iterate {} clamped into the domain", iterates.len());
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        y = state_at(sys, &x, steps, h)?;
        d = dist(&y, z);
        iterates.push(Iterate { x: x.clone(), d_a: d });
        if d < best * (1.0 - STALL_IMPROVEMENT) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best = best.min(d);
    }

    let best_it = iterates
        .iter()
        .min_by(|a, b| a.d_a.total_cmp(&b.d_a))
        .expect("iterates are nonempty")
        .clone();
    Ok(ReachResult {
        d_r: relative(best_it.d_a, iterates[0].d_a),
        converged: best_it.d_a <= cfg.epsilon,
        x: best_it.x,
        d_a: best_it.d_a,
        steps,
        iterates,
        warnings,
    })
}

/// Runs [`reach_target`] for every step in `first..=last` with the same seed
/// and returns the best result with its step. Ties go to the earliest step.
pub fn reach_target_interval(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    z: &[f64],
    first: usize,
    last: usize,
    h: f64,
    theta: &BoxRegion,
    cfg: &ReachConfig,
) -> Result<(ReachResult, usize)> {
    if first > last {
        return Err(Error::Config(format!("empty step interval [{first}, {last}]")));
    }
    let results = (first..=last)
        .into_par_iter()
        .map(|s| reach_target(sys, inv, z, s, h, theta, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.d_a < results[best].d_a {
            best = i;
        }
    }
    let r = results.into_iter().nth(best).expect("interval is nonempty");
    let s = r.steps;
    Ok((r, s))
}

/// When to aim for the targets of [`reach_targets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSpec {
    At(usize),
    Interval(usize, usize),
}

/// Seed for one target: the same target and base seed always give the same
/// random start.
pub fn target_seed(seed: u64, z: &[f64]) -> u64 {
    z.iter().fold(seed ^ 0x9e37_79b9_7f4a_7c15, |acc, v| {
        (acc ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3).rotate_left(17)
    })
}

/// Independent [`reach_target`] runs, one per target, in target order.
/// A failing target does not affect the others.
pub fn reach_targets(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    targets: &[Vec<f64>],
    time: TimeSpec,
    h: f64,
    theta: &BoxRegion,
    cfg: &ReachConfig,
) -> Vec<Result<ReachResult>> {
    targets
        .par_iter()
        .map(|z| {
            let cfg = ReachConfig {
                seed: target_seed(cfg.seed, z),
                ..cfg.clone()
            };
            match time {
                TimeSpec::At(s) => reach_target(sys, inv, z, s, h, theta, &cfg),
                TimeSpec::Interval(a, b) => {
                    reach_target_interval(sys, inv, z, a, b, h, theta, &cfg).map(|(r, _)| r)
                }
            }
        })
        .collect()
}

/// One probe of [`random_vector_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorProbe {
    pub v_norm: f64,
    pub steps: usize,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEvalConfig {
    pub first: usize,
    pub last: usize,
    pub count: usize,
    /// Perturbation norms are drawn uniformly from `(0, max_norm]`.
    pub max_norm: f64,
    pub seed: u64,
}

/// Asks the inverse model to shift trajectories by random vectors and
/// measures how far the corrected trajectory lands from the requested state.
///
/// For each probe, `x1 ∈ Θ`, a step `s` in the interval and a nonzero `v`
/// are drawn; with `u = Φ⁻¹(ξ(x1, t), v, t)` the absolute error is
/// `‖ξ(x1 + u, t) − (ξ(x1, t) + v)‖` and the relative error divides it by `‖v‖`.
pub fn random_vector_eval(
    sys: &SystemSpec,
    inv: &dyn SensitivityModel,
    theta: &BoxRegion,
    h: f64,
    cfg: &VectorEvalConfig,
) -> Result<Vec<VectorProbe>> {
    if cfg.count == 0 {
        return Err(Error::Config("probe count must be ≥ 1".into()));
    }
    if cfg.first == 0 || cfg.first > cfg.last {
        return Err(Error::Config(format!(
            "invalid step interval [{}, {}]",
            cfg.first, cfg.last
        )));
    }
    if !(cfg.max_norm > 0.0) {
        return Err(Error::Config("max_norm must be > 0".into()));
    }
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<(Vec<f64>, usize, Vec<f64>)> = (0..cfg.count)
        .map(|_| {
            let x1 = theta.sample(&mut rng);
            let s = rng.random_range(cfg.first..=cfg.last);
            let r = cfg.max_norm * (1.0 - rng.random::<f64>());
            let dir: Vec<f64> = loop {
                let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let l = norm(&g);
                if l > 1e-3 && l <= 1.0 {
                    break g.iter().map(|c| c / l).collect();
                }
            };
            (x1, s, dir.iter().map(|c| c * r).collect())
        })
        .collect();
    draws
        .par_iter()
        .map(|(x1, s, v)| {
            let t = *s as f64 * h;
            let y = state_at(sys, x1, *s, h)?;
            let u = inv.eval(&y, v, t)?;
            let reached = state_at(sys, &add(x1, &u), *s, h)?;
            let abs_err = dist(&reached, &add(&y, v));
            let v_norm = norm(v);
            Ok(VectorProbe {
                v_norm,
                steps: *s,
                abs_err,
                rel_err: abs_err / v_norm,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_abs: f64,
    pub mean_rel: f64,
}

/// Equal-width bins over `[0, max ‖v‖]`; empty bins are dropped.
pub fn bin_by_norm(probes: &[VectorProbe], bins: usize) -> Vec<NormBin> {
    let Some(top) = probes.iter().map(|p| p.v_norm).reduce(f64::max) else {
        return Vec::new();
    };
    let bins = bins.max(1);
    let width = top / bins as f64;
    let mut acc = vec![(0usize, 0.0, 0.0); bins];
    for p in probes {
        let k = ((p.v_norm / width) as usize).min(bins - 1);
        acc[k].0 += 1;
        acc[k].1 += p.abs_err;
        acc[k].2 += p.rel_err;
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(k, (c, a, r))| NormBin {
            lo: k as f64 * width,
            hi: (k + 1) as f64 * width,
            count: c,
            mean_abs: a / c as f64,
            mean_rel: r / c as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    /// Initial state of the anchor trajectory.
    pub anchor_start: Vec<f64>,
    pub start: Vec<f64>,
    /// Inclusive step range.
    pub window: (usize, usize),
    pub step: f64,
    pub states: Vec<Vec<f64>>,
}

impl PredictedTrajectory {
    pub fn state_at_step(&self, s: usize) -> Option<&[f64]> {
        s.checked_sub(self.window.0)
            .and_then(|i| self.states.get(i))
            .map(Vec::as_slice)
    }

    /// Distance of every predicted state from the anchor's state at the same step.
    pub fn displacement(&self, anchor: &Trajectory) -> Vec<f64> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| dist(s, anchor.state(self.window.0 + i)))
            .collect()
    }
}

/// Predicts the trajectory from `start` over `window` as the anchor's states
/// plus `Φ(x_anchor, start − x_anchor, t)`. Nothing is simulated.
pub fn predict_trajectory(
    anchor: &Trajectory,
    fwd: &dyn SensitivityModel,
    start: &[f64],
    window: (usize, usize),
) -> Result<PredictedTrajectory> {
    let n = anchor.dim();
    if start.len() != n {
        return Err(Error::dim("start state", n, start.len()));
    }
    if fwd.dim() != n {
        return Err(Error::dim("forward model", n, fwd.dim()));
    }
    let (a, b) = window;
    if a > b || b > anchor.steps() {
        return Err(Error::Range(format!(
            "window [{a}, {b}] is outside the anchor horizon of {} steps",
            anchor.steps()
        )));
    }
    let x_i = anchor.initial();
    let v = sub(start, x_i);
    let states = (a..=b)
        .map(|s| {
            let phi = fwd.eval(x_i, &v, anchor.time(s))?;
            Ok(add(anchor.state(s), &phi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictedTrajectory {
        anchor_start: x_i.to_vec(),
        start: start.to_vec(),
        window,
        step: anchor.step(),
        states,
    })
}

/// [`predict_trajectory`] for many starts, in input order.
pub fn predict_batch(
    anchor: &Trajectory,
    fwd: &dyn SensitivityModel,
    starts: &[Vec<f64>],
    window: (usize, usize),
) -> Result<Vec<PredictedTrajectory>> {
    starts
        .par_iter()
        .map(|s| predict_trajectory(anchor, fwd, s, window))
        .collect()
}

/// `start,step,time,x1..xn`, one row per predicted state.
pub fn write_predictions_csv<W: Write>(mut w: W, preds: &[PredictedTrajectory]) -> std::io::Result<()> {
    let n = preds.first().map_or(0, |p| p.start.len());
    let cols: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(w, "start,step,time,{}", cols.join(","))?;
    for (k, p) in preds.iter().enumerate() {
        for (i, s) in p.states.iter().enumerate() {
            let step = p.window.0 + i;
            let xs: Vec<String> = s.iter().map(f64::to_string).collect();
            writeln!(w, "{k},{step},{},{}", step as f64 * p.step, xs.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin_system;
    use crate::sim::SensOracle;

    fn rotation() -> (SystemSpec, crate::sim::LinearSensitivity, crate::sim::LinearSensitivity) {
        let sys = builtin_system("linear-rotation").unwrap();
        let o = SensOracle::from_system(&sys).unwrap();
        (sys.clone(), o.model(false), o.model(true))
    }

    #[test]
    fn target_on_the_start_trajectory_converges_immediately() {
        let (sys, _, inv) = rotation();
        let theta = sys.meta().init_set.clone();
        let cfg = ReachConfig { seed: 7, ..Default::default() };
        let x = theta.sample(&mut ChaCha8Rng::seed_from_u64(7));
        let z = state_at(&sys, &x, 100, 0.01).unwrap();
        let r = reach_target(&sys, &inv, &z, 100, 0.01, &theta, &cfg).unwrap();
        assert_eq!(r.iterates.len(), 1);
        assert_eq!(r.d_a, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn exact_oracle_converges_in_one_pass() {
        let (sys, _, inv) = rotation();
        let theta = sys.meta().init_set.clone();
        let z = state_at(&sys, &[0.3, -0.2], 314, 0.01).unwrap();
        let cfg = ReachConfig { epsilon: 1e-6, seed: 1, ..Default::default() };
        let r = reach_target(&sys, &inv, &z, 314, 0.01, &theta, &cfg).unwrap();
        assert!(r.converged, "{r:?}");
        assert_eq!(r.iterates.len(), 2);
        assert!((r.d_r - r.d_a / r.d_orig()).abs() < 1e-15);
    }

    #[test]
    fn collapsed_interval_equals_single_time() {
        let (sys, _, inv) = rotation();
        let theta = sys.meta().init_set.clone();
        let cfg = ReachConfig::default();
        let single = reach_target(&sys, &inv, &[0.5, 0.5], 50, 0.01, &theta, &cfg).unwrap();
        let (r, s) = reach_target_interval(&sys, &inv, &[0.5, 0.5], 50, 50, 0.01, &theta, &cfg).unwrap();
        assert_eq!(s, 50);
        assert_eq!(r, single);
    }

    #[test]
    fn zero_shift_prediction_is_the_anchor() {
        let (sys, fwd, _) = rotation();
        let anchor = simulate(&sys, &[0.4, 0.1], 200, 0.01).unwrap();
        let p = predict_trajectory(&anchor, &fwd, &[0.4, 0.1], (0, 200)).unwrap();
        for (i, s) in p.states.iter().enumerate() {
            assert_eq!(s.as_slice(), anchor.state(i));
        }
        assert!(matches!(
            predict_trajectory(&anchor, &fwd, &[0.4, 0.1], (0, 201)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn bins_cover_all_probes() {
        let probes: Vec<VectorProbe> = (1..=10)
            .map(|k| VectorProbe { v_norm: k as f64, steps: 1, abs_err: k as f64, rel_err: 1.0 })
            .collect();
        let bins = bin_by_norm(&probes, 5);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 10);
        assert!(bins.windows(2).all(|w| w[0].mean_abs < w[1].mean_abs));
    }
}

//! Predicts a cluster of neighbouring trajectories from one simulated anchor,
//! exactly on a linear system and approximately with a trained net.

mod common;

use neurosens::data::RecordKind;
use neurosens::explore::predict_batch;
use neurosens::linalg::dist;
use neurosens::net::SensitivityModel;
use neurosens::sim::SensOracle;
use neurosens::{builtin_system, simulate, BoxRegion, SystemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(sys: &SystemSpec, model: &dyn SensitivityModel, anchor_x: &[f64], steps: usize) -> neurosens::Result<()> {
    let anchor = simulate(sys, anchor_x, steps, 0.01)?;
    let around = BoxRegion::around(anchor_x, &[0.1, 0.1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let starts: Vec<Vec<f64>> = (0..50).map(|_| around.sample(&mut rng)).collect();
    let preds = predict_batch(&anchor, model, &starts, (0, steps))?;
    let mut worst: f64 = 0.0;
    let mut mean = 0.0;
    for p in &preds {
        let truth = simulate(sys, &p.start, steps, 0.01)?;
        let errs: Vec<f64> = p.states.iter().enumerate().map(|(i, x)| dist(x, truth.state(i))).collect();
        worst = worst.max(errs.iter().cloned().fold(0.0, f64::max));
        mean += errs.iter().sum::<f64>() / errs.len() as f64 / preds.len() as f64;
    }
    println!("{:<16} 50 predicted trajectories, 1 simulation: mean error {mean:.2e}, worst {worst:.2e}", sys.name());
    Ok(())
}

fn main() -> neurosens::Result<()> {
    let rot = builtin_system("linear-rotation")?;
    report(&rot, &SensOracle::from_system(&rot)?.model(false), &[0.5, 0.0], 628)?;
    let vdp = builtin_system("Vanderpol")?;
    report(&vdp, &common::net_for(&vdp, RecordKind::Forward)?, &[1.0, 1.0], 500)
}

//! Defines a system outside the registry (a damped pendulum) and measures
//! how nearby trajectories separate.

use neurosens::dynamics::FieldFn;
use neurosens::sim::empirical_sensitivity;
use neurosens::{simulate, BoxRegion, SystemSpec};
use std::sync::Arc;

fn main() -> neurosens::Result<()> {
    let field: FieldFn = Arc::new(|x, _u, out| {
        out[0] = x[1];
        out[1] = -9.81 * x[0].sin() - 0.3 * x[1];
    });
    let sys = SystemSpec::continuous("pendulum", BoxRegion::from_bounds(&[(-7.0, 7.0), (-20.0, 20.0)])?, field)?;
    let traj = simulate(&sys, &[2.5, 0.0], 1000, 0.01)?;
    println!("after 10 s: {:?}", traj.last());
    for steps in [100, 300, 1000] {
        let s = empirical_sensitivity(&sys, &[2.5, 0.0], &[0.01, 0.0], steps, 0.01)?;
        println!("t = {:>4.1}: Φ = [{:+.5}, {:+.5}]", steps as f64 * 0.01, s[0], s[1]);
    }
    Ok(())
}

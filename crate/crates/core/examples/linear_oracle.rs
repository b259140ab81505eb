//! Exact sensitivity of a linear system (matrix exponential) against the
//! sensitivity measured by simulating two trajectories.

use neurosens::sim::{empirical_sensitivity, linear_sensitivity, SensOracle};
use neurosens::builtin_system;

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("linear-stable")?;
    let oracle = SensOracle::from_system(&sys)?;
    let (x0, v, h) = ([0.4, -0.3], [0.05, 0.02], 0.01);
    println!("{:>6} {:>24} {:>24} {:>10}", "t", "exact", "simulated", "gap");
    for steps in [10, 50, 100, 250, 500] {
        let t = steps as f64 * h;
        let exact = linear_sensitivity(&oracle, &v, t, false)?;
        let sim = empirical_sensitivity(&sys, &x0, &v, steps, h)?;
        let gap = exact.iter().zip(&sim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{t:>6.2} [{:+.8}, {:+.8}] [{:+.8}, {:+.8}] {gap:>10.2e}", exact[0], exact[1], sim[0], sim[1]);
    }
    let back = linear_sensitivity(&oracle, &linear_sensitivity(&oracle, &v, 3.0, false)?, 3.0, true)?;
    println!("inverse of forward at t = 3: [{:+.12}, {:+.12}]", back[0], back[1]);
    Ok(())
}

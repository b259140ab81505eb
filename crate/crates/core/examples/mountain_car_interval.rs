//! Searches a time interval for the Mountain Car start that gets closest to a
//! position on the left hill, with a net trained on the closed loop.

mod common;

use neurosens::data::RecordKind;
use neurosens::explore::{reach_target_interval, ReachConfig};
use neurosens::{builtin_system, simulate};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("MountainCar")?;
    let h = sys.default_step();
    let (inv, mre) = common::train_net(&sys, RecordKind::Inverse, &[64, 64], 15, 20_000)?;
    eprintln!("inverse net held-out MRE {mre:.3}");
    let theta = sys.meta().init_set.clone();
    let z = [-0.9, 0.0];
    let cfg = ReachConfig { iterations: 5, seed: 1, ..Default::default() };
    let (r, step) = reach_target_interval(&sys, &inv, &z, 10, 40, h, &theta, &cfg)?;
    let traj = simulate(&sys, &r.x, step, h)?;
    println!("best start {:?} reaches {:?} at step {step} (d_a {:.4}, d_r {:.3})", r.x, traj.last(), r.d_a, r.d_r);
    let lowest = traj.states().iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
    println!("leftmost position on the way: {lowest:.4}");
    // iterates may leave Θ; they are only kept inside the domain
    println!("start inside Θ: {}", theta.contains(&r.x));
    Ok(())
}

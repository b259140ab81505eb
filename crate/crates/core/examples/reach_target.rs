//! Steers an initial state of Van der Pol so that its trajectory hits a
//! chosen state at a chosen time, using the inverse sensitivity net.

mod common;

use neurosens::data::RecordKind;
use neurosens::explore::{reach_target, ReachConfig};
use neurosens::{builtin_system, simulate};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let inv = common::net_for(&sys, RecordKind::Inverse)?;
    let theta = sys.meta().init_set.clone();
    // a reachable target: where [1.1, -0.4] is after 3 s
    let z = simulate(&sys, &[1.1, -0.4], 300, 0.01)?.last().to_vec();
    let cfg = ReachConfig { iterations: 10, seed: 7, ..Default::default() };
    let r = reach_target(&sys, &inv, &z, 300, 0.01, &theta, &cfg)?;
    for (k, it) in r.iterates.iter().enumerate() {
        println!("pass {k:>2}  x = [{:+.4}, {:+.4}]  d_a = {:.5}", it.x[0], it.x[1], it.d_a);
    }
    println!("best d_a {:.5}, d_r {:.3}, converged {}", r.d_a, r.d_r, r.converged);
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

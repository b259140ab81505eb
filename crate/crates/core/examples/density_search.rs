//! Greedy falsification with forward-sensitivity predictions: each round
//! predicts a cluster of neighbours of the current anchor and re-anchors on
//! the one predicted to come closest to the unsafe box.

mod common;

use neurosens::data::RecordKind;
use neurosens::falsify::{falsify_forward_density, DensitySearchConfig, SafetySpec};
use neurosens::{builtin_system, BoxRegion};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let fwd = common::net_for(&sys, RecordKind::Forward)?;
    let spec = SafetySpec::new(BoxRegion::from_bounds(&[(2.1, 2.4), (-0.5, 0.5)])?, 500);
    let cfg = DensitySearchConfig { seed: 1, ..Default::default() };
    let report = falsify_forward_density(&sys, &fwd, &spec, &sys.meta().init_set, 0.01, &cfg)?;
    for (k, it) in report.iterations.iter().enumerate() {
        let pick = &it.predicted[it.chosen];
        println!(
            "round {k:>2}  anchor [{:+.4}, {:+.4}] at distance {:.4}  window {:?}  predicted best {:.4}",
            it.anchor.x[0], it.anchor.x[1], it.anchor.distance, it.window, pick.distance
        );
    }
    println!("{:?} after {} simulations ({:?})", report.outcome, report.samples_used, report.stop);
    Ok(())
}

//! Looks for a Van der Pol start that enters an unsafe box by aiming the
//! inverse sensitivity net at random states inside it.

mod common;

use neurosens::data::RecordKind;
use neurosens::falsify::{falsify_inverse, verify_counterexample, InverseSearchConfig, SafetySpec};
use neurosens::{builtin_system, BoxRegion};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let inv = common::net_for(&sys, RecordKind::Inverse)?;
    let spec = SafetySpec::new(BoxRegion::from_bounds(&[(-2.3, -2.0), (0.5, 0.8)])?, 500);
    let cfg = InverseSearchConfig { seed: 3, ..Default::default() };
    let report = falsify_inverse(&sys, &inv, &spec, &sys.meta().init_set, 0.01, &cfg)?;
    println!("{:?} after {} simulations ({:?})", report.outcome, report.samples_used, report.stop);
    if let Some(c) = &report.counterexample {
        println!("counterexample {:?} enters at step {}, re-checked: {}", c.x0, c.step, verify_counterexample(&sys, &spec, c, 0.01)?);
    }
    let closest = report.profile.iter().min_by(|a, b| a.distance.total_cmp(&b.distance));
    if let Some(p) = closest {
        println!("closest probe {:?} at distance {:.4}", p.x, p.distance);
    }
    Ok(())
}

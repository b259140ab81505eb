//! Uniform random falsification, for comparing sample counts.

use neurosens::falsify::{falsify_random_baseline, SafetySpec};
use neurosens::{builtin_system, BoxRegion};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let spec = SafetySpec::new(BoxRegion::from_bounds(&[(-2.3, -2.0), (0.5, 0.8)])?, 500);
    let counts: Vec<usize> = (0..20)
        .map(|seed| falsify_random_baseline(&sys, &spec, &sys.meta().init_set, 0.01, 1000, seed).map(|r| r.samples_used))
        .collect::<neurosens::Result<_>>()?;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    println!("simulations until entry over 20 seeds: {counts:?} (mean {mean:.1})");
    Ok(())
}

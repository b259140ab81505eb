//! Error of inverse-sensitivity corrections as a function of the requested
//! displacement size, binned by ‖v‖.

mod common;

use neurosens::builtin_system;
use neurosens::data::RecordKind;
use neurosens::explore::{bin_by_norm, random_vector_eval, VectorEvalConfig};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let inv = common::net_for(&sys, RecordKind::Inverse)?;
    let cfg = VectorEvalConfig { first: 25, last: 70, count: 1000, max_norm: 1.0, seed: 0 };
    let probes = random_vector_eval(&sys, &inv, &sys.meta().init_set, 0.01, &cfg)?;
    println!("{:>14} {:>6} {:>10} {:>10}", "‖v‖", "count", "abs err", "rel err");
    for b in bin_by_norm(&probes, 5) {
        println!("[{:.2}, {:.2}) {:>6} {:>10.4} {:>10.4}", b.lo, b.hi, b.count, b.mean_abs, b.mean_rel);
    }
    Ok(())
}

//! Trains forward and inverse sensitivity nets (4×128, relu) on Van der Pol
//! and saves them for the other examples.
//!
//! cargo run --release --example train_vanderpol -- 40

mod common;

use neurosens::builtin_system;
use neurosens::data::RecordKind;
use std::time::Instant;

fn main() -> neurosens::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let sys = builtin_system("Vanderpol")?;
    for kind in [RecordKind::Forward, RecordKind::Inverse] {
        let t = Instant::now();
        let (net, mre) = common::train_net(&sys, kind, &[128; 4], epochs, 50_000)?;
        let path = common::model_path(&sys, kind);
        net.save(&path)?;
        println!("{:<8} held-out MRE {mre:.3} after {epochs} epochs ({:.0?}), saved {}", kind.as_str(), t.elapsed(), path.display());
    }
    Ok(())
}

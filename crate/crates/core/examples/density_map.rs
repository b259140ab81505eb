//! Distance-to-unsafe maps of Brusselator initial states for two unsafe
//! boxes, written as CSV for heat maps.

mod common;

use neurosens::data::RecordKind;
use neurosens::falsify::{inverse_density_map, write_profile_csv, DensityMapConfig, SafetySpec};
use neurosens::{builtin_system, BoxRegion};
use std::fs::File;

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Brusselator")?;
    let (inv, mre) = common::train_net(&sys, RecordKind::Inverse, &[64, 64, 64], 8, 20_000)?;
    eprintln!("inverse net held-out MRE {mre:.3}");
    let boxes = [[(2.0, 2.5), (2.0, 2.5)], [(0.3, 0.6), (3.0, 3.5)]];
    for (k, b) in boxes.iter().enumerate() {
        let spec = SafetySpec::new(BoxRegion::from_bounds(b)?, 400);
        let map = inverse_density_map(&sys, &inv, &spec, &sys.meta().init_set, 0.01, &DensityMapConfig::default())?;
        let path = std::env::temp_dir().join(format!("neurosens-map-{k}.csv"));
        let file = File::create(&path).map_err(|e| neurosens::Error::io(&path, e))?;
        write_profile_csv(file, &map).map_err(|e| neurosens::Error::io(&path, e))?;
        let mean = map.iter().map(|p| p.distance).sum::<f64>() / map.len() as f64;
        let min = map.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
        println!("box {b:?}: {} probes, mean distance {mean:.3}, min {min:.3} -> {}", map.len(), path.display());
    }
    Ok(())
}

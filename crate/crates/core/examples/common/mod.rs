#![allow(dead_code)]

use neurosens::data::{generate_corpus, make_records, RecordConfig, RecordKind};
use neurosens::net::{evaluate, train, Activation, Init, Mlp, ModelMeta, SensitivityNet, TrainConfig};
use neurosens::{Result, SystemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn model_path(sys: &SystemSpec, kind: RecordKind) -> PathBuf {
    std::env::temp_dir().join(format!("neurosens-{}-{}.json", sys.name(), kind.as_str()))
}

/// Loads the net saved by the `train_vanderpol` example, or trains a small
/// one on the spot.
pub fn net_for(sys: &SystemSpec, kind: RecordKind) -> Result<SensitivityNet> {
    let path = model_path(sys, kind);
    if let Ok(net) = SensitivityNet::load(&path) {
        eprintln!("using {}", path.display());
        return Ok(net);
    }
    eprintln!("no saved {} net for {}, training a small one", kind.as_str(), sys.name());
    let (net, mre) = train_net(sys, kind, &[64, 64, 64], 8, 20_000)?;
    eprintln!("held-out MRE {mre:.3}");
    Ok(net)
}

pub fn train_net(
    sys: &SystemSpec,
    kind: RecordKind,
    hidden: &[usize],
    epochs: usize,
    budget: usize,
) -> Result<(SensitivityNet, f64)> {
    let h = sys.default_step();
    let steps = sys.meta().horizon;
    let corpus = generate_corpus(sys, &sys.meta().init_set, 30, steps, h, 1)?;
    let (tr, te) = make_records(&corpus, &RecordConfig::new(kind, budget, 2))?.split(0.1)?;
    let n = sys.dim();
    let mut widths = vec![2 * n + 1];
    widths.extend_from_slice(hidden);
    widths.push(n);
    let mlp = Mlp::new(&widths, Activation::Relu, Init::NguyenWidrow, &mut ChaCha8Rng::seed_from_u64(3))?;
    let (mlp, _) = train(mlp, &tr, &TrainConfig { epochs, seed: 4, ..Default::default() })?;
    let mre = evaluate(&mlp, &te)?.mre;
    let meta = ModelMeta { system: sys.name().to_string(), kind, h, dim: n };
    Ok((SensitivityNet::new(mlp, tr.normalization.expect("split fits normalization"), meta)?, mre))
}

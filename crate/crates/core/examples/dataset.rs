//! Builds forward and inverse sensitivity datasets from a trajectory corpus
//! and writes the training split to disk.

use neurosens::builtin_system;
use neurosens::data::{candidate_count, generate_corpus, make_records, verify_record, Pairing, RecordConfig, RecordKind};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("Vanderpol")?;
    let corpus = generate_corpus(&sys, &sys.meta().init_set, 30, 500, 0.01, 1)?;
    println!("{} trajectories, {} candidate records", corpus.len(), candidate_count(&corpus, Pairing::CrossOffset));

    let out = std::env::temp_dir().join("neurosens-dataset");
    std::fs::create_dir_all(&out).map_err(|e| neurosens::Error::io(&out, e))?;
    for kind in [RecordKind::Forward, RecordKind::Inverse] {
        let ds = make_records(&corpus, &RecordConfig::new(kind, 50_000, 2))?;
        assert!(ds.records.iter().take(1000).all(|r| verify_record(&corpus, r)));
        let (train, test) = ds.split(0.1)?;
        let r = &train.records[0];
        println!("{}: {} train / {} test, first record x0 {:?} v {:?} t {} -> {:?}", kind.as_str(), train.len(), test.len(), r.x0, r.v, r.t, r.target);
        train.save(&out, &format!("{}-train", kind.as_str()))?;
    }
    println!("written to {}", out.display());
    Ok(())
}

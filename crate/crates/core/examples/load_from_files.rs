//! Writes a dataset in the on-disk formats, loads it back and solves it the
//! way the command-line tool does.
//!
//! Pass a directory holding `features.csv`, `candidates.txt` and optionally
//! `truth.txt` to run on your own data instead.

use std::path::PathBuf;

use mcar::harness::io::{write_candidates, write_features, write_truth};
use mcar::harness::{load_dataset, synthesize_dataset, DatasetPaths, LoadOptions};
use mcar::ice::{wmcar_ice, IceConfig};
use mcar::labels::labeling_error_rate;
use mcar::synth::{AmbiguityParams, ConvexHullSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let dir = std::env::temp_dir().join("mcar-files-example");
            std::fs::create_dir_all(&dir)?;
            let amb = AmbiguityParams {
                fraction: 0.7,
                extra_count: 2,
                epsilon: 0.3,
                seed: 0,
            };
            let ds = synthesize_dataset(&ConvexHullSpec::uniform(4, 2, 20, 30, 5), &amb, None, 5)?;
            write_features(&dir.join("features.csv"), ds.features())?;
            write_candidates(&dir.join("candidates.txt"), ds.candidates())?;
            write_truth(&dir.join("truth.txt"), ds.ground_truth().unwrap())?;
            println!("wrote example data to {}", dir.display());
            dir
        }
    };
    let truth = dir.join("truth.txt");
    let paths = DatasetPaths {
        features: dir.join("features.csv"),
        candidates: dir.join("candidates.txt"),
        groups: None,
        truth: truth.exists().then_some(truth),
    };
    let loaded = load_dataset(
        &paths,
        &LoadOptions {
            normalize: true,
            ..Default::default()
        },
    )?;
    let ds = &loaded.dataset;
    println!(
        "{} instances, {} features, {} classes",
        ds.num_instances(),
        ds.feature_dim(),
        ds.num_classes()
    );

    let out = wmcar_ice(ds, &IceConfig::default())?;
    let pred = out.predictions()?;
    match ds.ground_truth() {
        Some(t) => println!("error {:.3}", labeling_error_rate(&pred, t)?),
        None => println!("first labels: {:?}", &pred[..pred.len().min(10)]),
    }
    Ok(())
}

//! Prints the default experiment configuration as TOML, ready to edit and
//! pass to `case grid --config`.
//!
//! With `--run`, evaluates a one-cell, one-seed grid with fewer patients
//! and writes `results.json` and `results.csv` to a temporary directory.

use case::harness::{run_grid, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::default();
    if std::env::args().nth(1).as_deref() != Some("--run") {
        print!("{}", config.to_toml_string());
        return Ok(());
    }
    config.seeds = vec![0];
    config.synth.patients = 6;
    config.grid.group_counts = vec![3];
    config.grid.vocab_sizes = vec![50];
    config.cluster.min_cluster_size = 60;
    config.cluster.min_samples = 15;
    let dir = tempfile::tempdir()?;
    let results = run_grid(&config, Some(dir.path()))?;
    results.write(dir.path())?;
    print!("{}", std::fs::read_to_string(dir.path().join("results.csv"))?);
    Ok(())
}

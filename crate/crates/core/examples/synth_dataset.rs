//! Generates a small synthetic corpus and writes it as JSON Lines.
//!
//! ```text
//! cargo run --example synth_dataset -- out.jsonl
//! ```

use case::syngen::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 5, 1000, 7);
    let (dataset, models) = generate_dataset(&config)?;

    let groups = dataset.flat_groups().expect("synthetic data carries groups");
    let switches = groups.windows(2).filter(|w| w[0] != w[1]).count();
    println!("{} patients, {} events, {} groups", dataset.len(), dataset.event_count(), models.len());
    println!("expected run length {:.1}, observed about {:.1}", config.expected_run_length(), groups.len() as f64 / (switches + 1) as f64);
    for (g, m) in models.iter().enumerate().take(3) {
        println!("group {g}: most likely events {:?}", &m.permutation[..5]);
    }

    if let Some(path) = std::env::args().nth(1) {
        dataset.write_jsonl(path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}

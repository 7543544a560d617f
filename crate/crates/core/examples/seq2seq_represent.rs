//! Encodes events with Cat2Vec, trains the transformer autoencoder on
//! windows of encodings and averages encoder outputs into per-event
//! representations.

use case::cat2vec::{Cat2Vec, Cat2VecConfig};
use case::encoded::separation_ratio;
use case::numcore::ConvergenceRule;
use case::seq2seq::{training_windows, Seq2Seq, TransformerConfig};
use case::syngen::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dataset, _) = generate_dataset(&SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 4, 1000, 2))?;
    let mut c2v = Cat2Vec::init(Cat2VecConfig { input_dims: vec![100], contrastive_weight: 1.0, seed: 2, ..Cat2VecConfig::default() })?;
    c2v.train(&dataset)?;
    let enc = c2v.encode_dataset(&dataset)?.standardized();

    let config = TransformerConfig {
        encoder_layers: 2,
        convergence: ConvergenceRule { max_epochs: 5, ..ConvergenceRule::default() },
        seed: 2,
        ..TransformerConfig::default()
    };
    let window_len = config.window_len;
    let mut model = Seq2Seq::init(config)?;
    let windows = training_windows(&enc, window_len, window_len);
    let report = model.train(&windows)?;
    println!("{} windows, reconstruction mse {:.4} -> {:.4}", windows.len(), report.losses[0], report.final_loss());

    let reps = model.event_representations(&enc, 8)?;
    let groups = dataset.flat_groups().unwrap();
    println!("separation: cat2vec {:.3}, seq2seq {:.3}", separation_ratio(&enc.data, enc.dim, &groups), separation_ratio(&reps.data, reps.dim, &groups));
    let mut csv = Vec::new();
    reps.write_csv(&mut csv)?;
    for line in String::from_utf8(csv)?.lines().take(3) {
        println!("{line}");
    }
    Ok(())
}

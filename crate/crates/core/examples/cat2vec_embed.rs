//! Trains the siamese event encoder and compares how far apart adjacent
//! events and random pairs end up.

use case::cat2vec::{Cat2Vec, Cat2VecConfig};
use case::encoded::separation_ratio;
use case::syngen::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dataset, _) = generate_dataset(&SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 10, 1000, 1))?;
    let mut model = Cat2Vec::init(Cat2VecConfig {
        input_dims: vec![100],
        // without the repulsive term every event maps to one point
        contrastive_weight: 1.0,
        seed: 1,
        ..Cat2VecConfig::default()
    })?;
    let report = model.train(&dataset)?;
    println!("{} epochs, loss {:.4} -> {:.4}", report.epochs(), report.losses[0], report.final_loss());

    let enc = model.encode_dataset(&dataset)?;
    let d = enc.dim;
    let dist = |i: usize, j: usize| enc.row(i).iter().zip(enc.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let n = enc.len();
    let adjacent = (0..n - 1).filter(|&i| enc.patient_ids[i] == enc.patient_ids[i + 1]).map(|i| dist(i, i + 1)).sum::<f64>() / (n - 1) as f64;
    let spread = (0..n).step_by(7).map(|i| dist(i, (i * 7919 + 13) % n)).sum::<f64>() / (n / 7) as f64;
    println!("mean distance: adjacent {adjacent:.4}, random pairs {spread:.4}");

    let groups = dataset.flat_groups().unwrap();
    println!("group separation in {d} dimensions: {:.3}", separation_ratio(&enc.data, d, &groups));
    Ok(())
}

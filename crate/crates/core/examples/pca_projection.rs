//! Projects Cat2Vec encodings onto two principal axes and prints the
//! per-group centroids in the plane.

use case::cat2vec::{Cat2Vec, Cat2VecConfig};
use case::harness::pca2d;
use case::syngen::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dataset, _) = generate_dataset(&SynthConfig::uniform_beta(100, 4, 0.03, 2.0, 5, 1000, 6))?;
    let mut model = Cat2Vec::init(Cat2VecConfig { input_dims: vec![100], contrastive_weight: 1.0, seed: 6, ..Cat2VecConfig::default() })?;
    model.train(&dataset)?;
    let enc = model.encode_dataset(&dataset)?;

    let p = pca2d(&enc.data, enc.dim)?;
    println!("explained variance {:.4} / {:.4}", p.explained_variance[0], p.explained_variance[1]);
    let groups = dataset.flat_groups().unwrap();
    let mut sums = vec![[0.0f64; 3]; 4];
    for (i, &g) in groups.iter().enumerate() {
        sums[g][0] += p.coords[2 * i];
        sums[g][1] += p.coords[2 * i + 1];
        sums[g][2] += 1.0;
    }
    for (g, [x, y, n]) in sums.iter().enumerate() {
        println!("group {g}: centroid ({:+.3}, {:+.3}) over {n} events", x / n, y / n);
    }
    Ok(())
}

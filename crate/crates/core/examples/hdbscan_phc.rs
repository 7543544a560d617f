//! Density clustering of three noisy blobs, then post-hoc relabeling of
//! the noise points by a vote of their labeled neighbours.

use case::clusterer::{hdbscan, phc, HdbscanParams, Points};
use case::metrics::ami;
use case::rng;
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut r = rng::seeded(9);
    let centers = [[0.0, 0.0], [6.0, 0.0], [3.0, 5.0]];
    let mut data = Vec::new();
    let mut truth = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..300 {
            // sum of uniforms: roughly Gaussian, bounded
            let jitter = |r: &mut rng::CaseRng| (0..4).map(|_| r.random::<f64>() - 0.5).sum::<f64>() * 1.5;
            data.push(c[0] + jitter(&mut r));
            data.push(c[1] + jitter(&mut r));
            truth.push(k as i64);
        }
    }
    let points = Points::new(&data, 2)?;

    let labels = hdbscan(&points, HdbscanParams { min_cluster_size: 30, min_samples: 10 })?;
    println!("{} clusters, {} noise, AMI {:.4}", labels.cluster_count(), labels.noise_count(), ami(&truth, labels.labels())?);

    let relabeled = phc(&labels, &points, 20)?;
    println!("after relabeling {} points: AMI {:.4}", relabeled.relabeled, ami(&truth, relabeled.labels.labels())?);
    Ok(())
}

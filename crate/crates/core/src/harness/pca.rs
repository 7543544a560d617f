use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Points projected onto the top two principal axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `n × 2`, row-major.
    pub coords: Vec<f64>,
    /// Variance along each axis, largest first.
    pub explained_variance: [f64; 2],
}

/// Projects mean-centered rows onto the two leading eigenvectors of their
/// covariance. Without a second direction of variance the second column is
/// zero.
pub fn pca2d(points: &[f64], dim: usize) -> Result<Projection, HarnessError> {
    if dim < 2 || points.len() % dim != 0 || points.len() / dim < 2 {
        return Err(HarnessError::Config(format!("pca needs at least 2 points of dimension ≥ 2 ({} values, dim {dim})", points.len())));
    }
    let n = points.len() / dim;
    let mut x = DMatrix::from_row_slice(n, dim, points);
    for c in 0..dim {
        let mean = x.column(c).mean();
        x.column_mut(c).add_scalar_mut(-mean);
    }
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut coords = vec![0.0; n * 2];
    let mut explained = [0.0; 2];
    for (k, &axis) in order.iter().take(2).enumerate() {
        let var = eig.eigenvalues[axis].max(0.0);
        if k == 1 && var <= top * 1e-12 {
            break;
        }
        explained[k] = var;
        let proj = &x * eig.eigenvectors.column(axis);
        for i in 0..n {
            coords[i * 2 + k] = proj[i];
        }
    }
    Ok(Projection { coords, explained_variance: explained })
}

//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use case::numcore::{Graph, NodeId, Tensor};

/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Relative error used by the gradient checks: `|a − n| / max(|a|, |n|)`,
/// with components where both magnitudes are below `1e-7` skipped (their
/// ratio is dominated by rounding, not by derivative mistakes).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares reverse-mode gradients of `loss` against central differences
/// over every scalar of every parameter. Returns the largest relative error.
pub fn gradcheck<'a, F>(params: &'a [Tensor], loss: F) -> f64
where
    F: Fn(&mut Graph<'a>, &[NodeId]) -> NodeId,
{
    let analytic: Vec<Tensor> = {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = params.iter().map(|p| g.param(p)).collect();
        let l = loss(&mut g, &ids);
        let grads = g.backward(l).expect("backward");
        ids.iter()
            .zip(params)
            .map(|(&id, p)| grads.get(id).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    };
    let eval = |ps: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ps.iter().map(|p| g.constant(p.clone())).collect();
        let l = loss(&mut g, &ids);
        g.value(l).item().expect("scalar loss")
    };

    let mut worst = 0.0f64;
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.len() {
            let orig = p.data()[k];
            work[pi].data_mut()[k] = orig + FD_STEP;
            let plus = eval(&work);
            work[pi].data_mut()[k] = orig - FD_STEP;
            let minus = eval(&work);
            work[pi].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[pi].data()[k], numeric));
        }
    }
    worst
}

/// Deterministic pseudo-random tensor for test fixtures.
pub fn fixture(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

//! Fits a one-hidden-layer network to XOR with the reverse-mode engine and
//! Adam.

use case::numcore::{glorot_uniform, AdamConfig, AdamState, Graph, Tensor};
use case::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut r = rng::seeded(3);
    let x = Tensor::new(vec![4, 2], vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0])?;
    let y = Tensor::new(vec![4, 1], vec![0.0, 1.0, 1.0, 0.0])?;
    let mut params = vec![
        glorot_uniform(2, 8, &mut r),
        Tensor::zeros(&[8]),
        glorot_uniform(8, 1, &mut r),
        Tensor::zeros(&[1]),
    ];
    let mut adam = AdamState::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, &params)?;

    for step in 0..=500 {
        let (loss, grads) = {
            let mut g = Graph::new();
            let p: Vec<_> = params.iter().map(|t| g.param(t)).collect();
            let xi = g.constant(x.clone());
            let yi = g.constant(y.clone());
            let h = g.matmul(xi, p[0])?;
            let h = g.add(h, p[1])?;
            let h = g.relu(h)?;
            let o = g.matmul(h, p[2])?;
            let o = g.add(o, p[3])?;
            let o = g.sigmoid(o)?;
            let loss = g.mse(o, yi)?;
            let mut grads = g.backward(loss)?;
            (g.value(loss).data()[0], p.iter().map(|&id| grads.take(id)).collect::<Vec<_>>())
        };
        if step % 100 == 0 {
            println!("step {step:>3}: mse {loss:.5}");
        }
        adam.step(&mut params, &grads)?;
    }
    Ok(())
}

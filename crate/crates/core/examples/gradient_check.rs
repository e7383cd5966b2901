//! Compares the hand-derived gradients of both networks with central finite
//! differences on a small random model.

use acmvl::loss::one_hot;
use acmvl::network::{
    ae_backward, ae_forward, ae_loss, init_model, sup_backward, sup_forward, sup_loss, ArchSpec,
};
use acmvl::{Matrix, Result, RngSeed};
use rand::Rng;

const STEP: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest relative error over every entry of `w`, probing `loss` by central differences.
fn check(w: &mut Matrix, grad: &Matrix, mut loss: impl FnMut(&Matrix) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            let orig = w.get(i, j);
            w.set(i, j, orig + STEP);
            let up = loss(w);
            w.set(i, j, orig - STEP);
            let down = loss(w);
            w.set(i, j, orig);
            worst = worst.max(rel_err((up - down) / (2.0 * STEP), grad.get(i, j)));
        }
    }
    worst
}

pub fn run_example() -> Result<(f64, f64)> {
    let arch = ArchSpec {
        view_input_dims: vec![5, 4],
        encoder_dims: vec![4, 3, 2],
        supervised_dims: vec![4, 3, 3],
        joint_dim: 3,
    };
    let mut params = init_model(&arch, RngSeed(11))?;
    let mut rng = RngSeed(12).rng();
    let views: Vec<Matrix> = arch
        .view_input_dims
        .iter()
        .map(|&m| {
            Matrix::new(
                4,
                m,
                (0..4 * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect::<Result<_>>()?;
    let y = one_hot(&[0, 1, 2, 1], 3)?;

    // autoencoder of view 0, decoder weights
    let cache = ae_forward(&views[0], &params.encoders[0], &params.decoders[0])?;
    let g = ae_backward(&cache, &views[0], &params.encoders[0], &params.decoders[0])?;
    let enc = params.encoders[0].clone();
    let mut ae_worst: f64 = 0.0;
    for l in 0..3 {
        let mut dec = params.decoders[0].clone();
        let mut w = dec.weights[l].clone();
        ae_worst = ae_worst.max(check(&mut w, &g.dec[l], |w| {
            dec.weights[l] = w.clone();
            ae_loss(&views[0], &enc, &dec).unwrap()
        }));
    }

    // fusion network, gradient reaching view 1's first encoder layer
    let cache = sup_forward(&views, &params.encoders, &params.sup)?;
    let g = sup_backward(&cache, &views, &y, &params.encoders, &params.sup)?;
    let mut w = params.encoders[1].weights[0].clone();
    let sup = params.sup.clone();
    let sup_worst = check(&mut w, &g.enc[1][0], |w| {
        params.encoders[1].weights[0] = w.clone();
        sup_loss(&views, &y, &params.encoders, &sup).unwrap()
    });
    Ok((ae_worst, sup_worst))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let (ae, sup) = run_example()?;
    println!("decoder gradients: worst relative error {ae:.2e}");
    println!("encoder gradient through the fusion path: worst relative error {sup:.2e}");
    Ok(())
}

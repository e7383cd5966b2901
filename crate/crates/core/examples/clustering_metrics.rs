//! Fits a diagonal GMM to three Gaussian blobs and scores the clustering.

use acmvl::eval::{fit_gmm, jaccard, nmi};
use acmvl::{Matrix, Result, RngSeed};
use rand_distr::{Distribution, Normal};

pub fn run_example() -> Result<(f64, f64, usize)> {
    let mut rng = RngSeed(21).rng();
    let noise = Normal::new(0.0, 0.4).expect("valid std");
    let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..50 {
            rows.push(vec![
                c[0] + noise.sample(&mut rng),
                c[1] + noise.sample(&mut rng),
            ]);
            labels.push(k);
        }
    }
    let x = Matrix::from_rows(&rows)?;
    let gmm = fit_gmm(&x, 3, RngSeed(1), 200, 1e-8)?;
    let clusters = gmm.predict(&x)?;
    Ok((
        nmi(&clusters, &labels)?,
        jaccard(&clusters, &labels)?,
        gmm.log_likelihood.len(),
    ))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let (n, j, iters) = run_example()?;
    println!("EM iterations {iters}");
    println!("NMI {n:.4}  Jaccard {j:.4}");
    Ok(())
}

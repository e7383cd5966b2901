use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Clamp inside the log of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

/// A loss value together with its gradient.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Matrix,
}

fn check_shapes(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Mean squared reconstruction error `||X - Xhat||_F^2 / (rows * cols)` and its
/// gradient `2 (Xhat - X) / (rows * cols)` with respect to `xhat`.
pub fn recon_loss(x: &Matrix, xhat: &Matrix) -> Result<LossGrad> {
    check_shapes(x, xhat, "recon_loss")?;
    let count = x.values().len().max(1) as f64;
    let diff = xhat.sub(x)?;
    Ok(LossGrad {
        loss: diff.frobenius_sq() / count,
        grad: diff.scale(2.0 / count),
    })
}

/// Categorical cross-entropy `-(1/N) sum y log(yhat + eps)` over softmax outputs.
///
/// The returned gradient is taken with respect to the pre-softmax logits, where
/// softmax and cross-entropy collapse to `(yhat - y) / N`.
pub fn ce_loss(yhat: &Matrix, y_onehot: &Matrix) -> Result<LossGrad> {
    check_shapes(yhat, y_onehot, "ce_loss")?;
    let n = yhat.rows().max(1) as f64;
    let loss = -yhat
        .values()
        .iter()
        .zip(y_onehot.values())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| y * (p + LOG_EPS).ln())
        .sum::<f64>()
        / n;
    Ok(LossGrad {
        loss,
        grad: yhat.sub(y_onehot)?.scale(1.0 / n),
    })
}

/// One-hot encoding of `labels` over `classes` columns.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::arg(format!(
                "label {l} at row {i} >= class count {classes}"
            )));
        }
        m.set(i, l, 1.0);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::tensor::softmax_rows;
    use rand::Rng;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = RngSeed(seed).rng();
        Matrix::new(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        )
        .unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn recon_examples() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let z = Matrix::zeros(1, 2);
        assert_eq!(recon_loss(&x, &x).unwrap().loss, 0.0);
        assert_eq!(recon_loss(&x, &z).unwrap().loss, 0.5);
        let at_min = recon_loss(&x, &x).unwrap().grad;
        assert!(at_min.values().iter().all(|&g| g == 0.0));
        assert!(matches!(
            recon_loss(&x, &Matrix::zeros(2, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ce_examples() {
        let y = one_hot(&[0, 2], 3).unwrap();
        assert!(ce_loss(&y, &y).unwrap().loss.abs() < 1e-11);

        let uniform = Matrix::filled(1, 4, 0.25);
        let y4 = one_hot(&[1], 4).unwrap();
        assert!((ce_loss(&uniform, &y4).unwrap().loss - 4f64.ln()).abs() < 1e-11);

        let half = Matrix::filled(1, 2, 0.5);
        let g = ce_loss(&half, &one_hot(&[0], 2).unwrap()).unwrap().grad;
        assert_eq!(g.values(), &[-0.5, 0.5]);

        assert!(matches!(ce_loss(&half, &y4), Err(Error::Shape(_))));
    }

    #[test]
    fn one_hot_rejects_out_of_range() {
        assert!(one_hot(&[0, 3], 3).is_err());
    }

    #[test]
    fn recon_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let x = rand_matrix(3, 4, seed);
            let xhat = rand_matrix(3, 4, seed + 100);
            let grad = recon_loss(&x, &xhat).unwrap().grad;
            for k in 0..12 {
                let h = 1e-4;
                let mut plus = xhat.clone();
                plus.values_mut()[k] += h;
                let mut minus = xhat.clone();
                minus.values_mut()[k] -= h;
                let fd = (recon_loss(&x, &plus).unwrap().loss
                    - recon_loss(&x, &minus).unwrap().loss)
                    / (2.0 * h);
                assert!(rel_err(grad.values()[k], fd) <= 1e-4);
            }
        }
    }

    #[test]
    fn ce_logit_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let logits = rand_matrix(3, 4, seed);
            let y = one_hot(&[0, 3, 1], 4).unwrap();
            let f = |l: &Matrix| ce_loss(&softmax_rows(l), &y).unwrap().loss;
            let grad = ce_loss(&softmax_rows(&logits), &y).unwrap().grad;
            for k in 0..12 {
                let h = 1e-4;
                let mut plus = logits.clone();
                plus.values_mut()[k] += h;
                let mut minus = logits.clone();
                minus.values_mut()[k] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!(
                    rel_err(grad.values()[k], fd) <= 1e-4,
                    "{} vs {fd}",
                    grad.values()[k]
                );
            }
        }
    }

    #[test]
    fn losses_nonnegative() {
        for seed in 0..20 {
            let a = rand_matrix(2, 3, seed);
            let b = rand_matrix(2, 3, seed + 50);
            assert!(recon_loss(&a, &b).unwrap().loss > 0.0);
            let p = softmax_rows(&a);
            assert!(ce_loss(&p, &one_hot(&[1, 2], 3).unwrap()).unwrap().loss >= 0.0);
        }
    }
}

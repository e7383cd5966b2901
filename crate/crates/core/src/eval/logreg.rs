use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::one_hot;
use crate::tensor::{softmax_rows, Matrix};

/// Multinomial logistic regression: `softmax(x W + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LogRegModel {
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    fn scores(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.weight.rows() {
            return Err(Error::shape(format!(
                "model expects {} features, input has {}",
                self.weight.rows(),
                x.cols()
            )));
        }
        let mut s = x.matmul(&self.weight)?;
        let k = self.classes();
        for (i, v) in s.values_mut().iter_mut().enumerate() {
            *v += self.bias[i % k];
        }
        Ok(s)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.scores(x)?))
    }
}

/// Full-batch gradient descent on the mean negative log-likelihood, starting
/// from all-zero parameters.
pub fn train_logreg(
    x: &Matrix,
    labels: &[usize],
    classes: usize,
    iters: usize,
    lr: f64,
) -> Result<LogRegModel> {
    if x.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let mut seen = vec![false; classes];
    for &l in labels {
        if l >= classes {
            return Err(Error::arg(format!("label {l} >= class count {classes}")));
        }
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::arg(
            "logistic regression needs at least 2 classes present",
        ));
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::arg(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let y = one_hot(labels, classes)?;
    let n = x.rows() as f64;
    let mut model = LogRegModel {
        weight: Matrix::zeros(x.cols(), classes),
        bias: vec![0.0; classes],
    };
    for _ in 0..iters {
        let resid = model.predict_proba(x)?.sub(&y)?;
        let gw = x.t_matmul(&resid)?;
        for (w, g) in model.weight.values_mut().iter_mut().zip(gw.values()) {
            *w -= lr * g / n;
        }
        for (k, b) in model.bias.iter_mut().enumerate() {
            let g: f64 = (0..resid.rows()).map(|i| resid.get(i, k)).sum();
            *b -= lr * g / n;
        }
    }
    Ok(model)
}

/// Argmax of the class scores; ties go to the lowest class id.
pub fn predict_logreg(model: &LogRegModel, x: &Matrix) -> Result<Vec<usize>> {
    let s = model.scores(x)?;
    Ok(s.row_iter().map(argmax).collect())
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::accuracy;
    use crate::rng::RngSeed;
    use rand_distr::{Distribution, Normal};

    fn blobs(per_class: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = RngSeed(seed).rng();
        let noise = Normal::new(0.0, 0.5).unwrap();
        let centers = [[-3.0, -3.0], [3.0, 3.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..per_class {
                rows.push(vec![
                    c[0] + noise.sample(&mut rng),
                    c[1] + noise.sample(&mut rng),
                ]);
                labels.push(k);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_blobs_fit() {
        let (x, y) = blobs(50, 1);
        let m = train_logreg(&x, &y, 2, 200, 0.5).unwrap();
        let pred = predict_logreg(&m, &x).unwrap();
        assert!(accuracy(&pred, &y).unwrap() >= 0.99);
        assert_eq!(pred, y);
    }

    #[test]
    fn untrained_model_is_uniform() {
        let (x, y) = blobs(10, 2);
        let m = train_logreg(&x, &y, 2, 0, 0.5).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.5));
        let pred = predict_logreg(&m, &x).unwrap();
        assert!(pred.iter().all(|&c| c == 0));
        assert_eq!(accuracy(&pred, &y).unwrap(), 0.5);
    }

    #[test]
    fn duplicated_data_gives_same_decisions() {
        let (x, y) = blobs(20, 3);
        let idx: Vec<usize> = (0..x.rows()).flat_map(|i| [i, i]).collect();
        let x2 = x.select_rows(&idx);
        let y2: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let a = train_logreg(&x, &y, 2, 100, 0.3).unwrap();
        let b = train_logreg(&x2, &y2, 2, 100, 0.3).unwrap();
        let (probe, _) = blobs(30, 99);
        assert_eq!(
            predict_logreg(&a, &probe).unwrap(),
            predict_logreg(&b, &probe).unwrap()
        );
        for (wa, wb) in a.weight.values().iter().zip(b.weight.values()) {
            assert!((wa - wb).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let (x, _) = blobs(5, 4);
        assert!(matches!(
            train_logreg(&x, &[0; 10], 2, 10, 0.1),
            Err(Error::Argument(_))
        ));
        let (x, y) = blobs(5, 4);
        let m = train_logreg(&x, &y, 2, 10, 0.1).unwrap();
        assert!(matches!(
            predict_logreg(&m, &Matrix::zeros(1, 3)),
            Err(Error::Shape(_))
        ));
        assert_eq!(predict_logreg(&m, &Matrix::zeros(1, 2)).unwrap().len(), 1);
    }

    #[test]
    fn zero_weights_predict_class_zero() {
        let m = LogRegModel {
            weight: Matrix::zeros(2, 3),
            bias: vec![0.0; 3],
        };
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![4.0, 0.5]]).unwrap();
        assert_eq!(predict_logreg(&m, &x).unwrap(), vec![0, 0]);
    }
}

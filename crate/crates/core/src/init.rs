use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::tensor::Matrix;

/// Half-width `sqrt(6 / (fan_in + fan_out))` of the Xavier/Glorot uniform range.
pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `fan_in x fan_out` weights drawn i.i.d. from `U[-L, L]` with `L = xavier_limit`.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: RngSeed) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::arg(format!(
            "xavier_init needs nonzero fans, got {fan_in}x{fan_out}"
        )));
    }
    let limit = xavier_limit(fan_in, fan_out);
    let mut rng = seed.rng();
    let values = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::new(fan_in, fan_out, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        let w = xavier_init(256, 64, RngSeed(3)).unwrap();
        assert_eq!(w.shape(), (256, 64));
        assert!(w.values().iter().all(|v| v.abs() <= 0.13693));
        let one = xavier_init(1, 1, RngSeed(99)).unwrap();
        assert!(one.get(0, 0).abs() <= 1.7321);
    }

    #[test]
    fn limit_values() {
        assert!((xavier_limit(256, 64) - 0.136_930_639).abs() < 1e-8);
        assert!((xavier_limit(1, 1) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            xavier_init(5, 3, RngSeed(11)).unwrap(),
            xavier_init(5, 3, RngSeed(11)).unwrap()
        );
        assert_ne!(
            xavier_init(5, 3, RngSeed(11)).unwrap(),
            xavier_init(5, 3, RngSeed(12)).unwrap()
        );
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(matches!(
            xavier_init(0, 4, RngSeed(0)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            xavier_init(4, 0, RngSeed(0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn moments_match_uniform() {
        let w = xavier_init(500, 200, RngSeed(2024)).unwrap();
        let n = w.values().len() as f64;
        let mean = w.sum() / n;
        let var = w.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let limit = xavier_limit(500, 200);
        let expected = limit * limit / 3.0;
        assert!(mean.abs() < 0.1 * limit, "mean {mean}");
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "var {var} vs {expected}"
        );
    }
}

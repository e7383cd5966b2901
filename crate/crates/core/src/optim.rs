//! AdaDelta with a step multiplier.
//!
//! Per element, with gradient `g`:
//!
//! ```text
//! E[g^2]  <- rho * E[g^2]  + (1 - rho) * g^2
//! delta   <- -lr * sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//! E[dx^2] <- rho * E[dx^2] + (1 - rho) * delta^2
//! x       <- x + delta
//! ```
//!
//! With `lr = 1` this is the plain AdaDelta recurrence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaDeltaConfig {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdaDeltaConfig {
    pub fn new(rho: f64, eps: f64, lr: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::arg(format!(
                "adadelta rho must lie in (0, 1), got {rho}"
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::arg(format!(
                "adadelta eps must be positive, got {eps}"
            )));
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::arg(format!(
                "adadelta lr must be positive, got {lr}"
            )));
        }
        Ok(Self { rho, eps, lr })
    }

    pub fn with_lr(lr: f64) -> Result<Self> {
        Self::new(DEFAULT_RHO, DEFAULT_EPS, lr)
    }
}

/// Accumulators for a single parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaDeltaState {
    pub config: AdaDeltaConfig,
    pub acc_grad: Matrix,
    pub acc_update: Matrix,
}

impl AdaDeltaState {
    pub fn new(shape: (usize, usize), config: AdaDeltaConfig) -> Self {
        Self {
            config,
            acc_grad: Matrix::zeros(shape.0, shape.1),
            acc_update: Matrix::zeros(shape.0, shape.1),
        }
    }

    /// Validating constructor taking raw hyperparameters.
    pub fn with_params(shape: (usize, usize), rho: f64, eps: f64, lr: f64) -> Result<Self> {
        Ok(Self::new(shape, AdaDeltaConfig::new(rho, eps, lr)?))
    }

    /// Applies one update to `param` in place.
    pub fn step(&mut self, param: &mut Matrix, grad: &Matrix) -> Result<()> {
        let shape = self.acc_grad.shape();
        if param.shape() != shape || grad.shape() != shape {
            return Err(Error::shape(format!(
                "adadelta state {}x{}, param {}x{}, grad {}x{}",
                shape.0,
                shape.1,
                param.rows(),
                param.cols(),
                grad.rows(),
                grad.cols()
            )));
        }
        let AdaDeltaConfig { rho, eps, lr } = self.config;
        let acc_g = self.acc_grad.values_mut();
        let acc_u = self.acc_update.values_mut();
        for (((p, &g), eg), eu) in param
            .values_mut()
            .iter_mut()
            .zip(grad.values())
            .zip(acc_g.iter_mut())
            .zip(acc_u.iter_mut())
        {
            *eg = rho * *eg + (1.0 - rho) * g * g;
            let delta = -lr * (*eu + eps).sqrt() / (*eg + eps).sqrt() * g;
            *eu = rho * *eu + (1.0 - rho) * delta * delta;
            *p += delta;
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameter and state, leaving inputs untouched.
pub fn adadelta_step(
    state: &AdaDeltaState,
    param: &Matrix,
    grad: &Matrix,
) -> Result<(Matrix, AdaDeltaState)> {
    let mut state = state.clone();
    let mut param = param.clone();
    state.step(&mut param, grad)?;
    Ok((param, state))
}

/// One optimizer state per matrix of a parameter list.
#[derive(Clone, Debug)]
pub struct AdaDeltaGroup {
    states: Vec<AdaDeltaState>,
}

impl AdaDeltaGroup {
    pub fn for_params<'a>(
        params: impl IntoIterator<Item = &'a Matrix>,
        config: AdaDeltaConfig,
    ) -> Self {
        Self {
            states: params
                .into_iter()
                .map(|p| AdaDeltaState::new(p.shape(), config))
                .collect(),
        }
    }

    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Matrix>,
        grads: impl IntoIterator<Item = &'a Matrix>,
    ) -> Result<()> {
        let mut count = 0;
        for ((state, p), g) in self.states.iter_mut().zip(params).zip(grads) {
            state.step(p, g)?;
            count += 1;
        }
        if count != self.states.len() {
            return Err(Error::shape(format!(
                "optimizer group holds {} states but received {count} parameters",
                self.states.len()
            )));
        }
        Ok(())
    }

    pub fn states(&self) -> &[AdaDeltaState] {
        &self.states
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::new(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn fresh_state_is_zero() {
        let a = AdaDeltaState::with_params((2, 2), 0.95, 1e-6, 0.5).unwrap();
        assert_eq!(a.acc_grad, Matrix::zeros(2, 2));
        assert_eq!(a.acc_update, Matrix::zeros(2, 2));
        let b = AdaDeltaState::with_params((2, 2), 0.95, 1e-6, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        for (rho, eps, lr) in [
            (1.0, 1e-6, 1.0),
            (0.0, 1e-6, 1.0),
            (0.9, 0.0, 1.0),
            (0.9, 1e-6, 0.0),
        ] {
            assert!(matches!(
                AdaDeltaState::with_params((1, 1), rho, eps, lr),
                Err(Error::Argument(_))
            ));
        }
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut s = AdaDeltaState::with_params((1, 2), 0.9, 1e-6, 1.0).unwrap();
        s.acc_grad = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        s.acc_update = Matrix::new(1, 2, vec![0.5, 0.25]).unwrap();
        let p = Matrix::new(1, 2, vec![3.0, -4.0]).unwrap();
        let (p2, s2) = adadelta_step(&s, &p, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(p2, p);
        assert_eq!(s2.acc_grad.values(), &[0.9, 1.8]);
        assert_eq!(s2.acc_update.values(), &[0.45, 0.225]);
    }

    #[test]
    fn first_step_value() {
        let s = AdaDeltaState::with_params((1, 1), 0.9, 1e-6, 1.0).unwrap();
        let (p, _) = adadelta_step(&s, &scalar(0.0), &scalar(1.0)).unwrap();
        let expected = -(1e-6f64).sqrt() / (0.1f64 + 1e-6).sqrt();
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0) + 0.0031623).abs() < 1e-7);
    }

    #[test]
    fn shape_mismatch() {
        let s = AdaDeltaState::with_params((2, 2), 0.9, 1e-6, 1.0).unwrap();
        assert!(matches!(
            adadelta_step(&s, &Matrix::zeros(2, 2), &Matrix::zeros(1, 2)),
            Err(Error::Shape(_))
        ));
    }

    proptest! {
        #[test]
        fn accumulators_stay_nonnegative_and_updates_bounded(
            grads in proptest::collection::vec(-1e3..1e3f64, 1..40),
            rho in 0.01..0.99f64,
            lr in 0.01..2.0f64,
        ) {
            let mut s = AdaDeltaState::with_params((1, 1), rho, 1e-6, lr).unwrap();
            let mut p = scalar(0.0);
            for g in grads {
                let before = p.get(0, 0);
                let bound = lr * ((s.acc_update.get(0, 0) + 1e-6) / 1e-6).sqrt() * g.abs();
                s.step(&mut p, &scalar(g)).unwrap();
                prop_assert!(s.acc_grad.get(0, 0) >= 0.0);
                prop_assert!(s.acc_update.get(0, 0) >= 0.0);
                prop_assert!((p.get(0, 0) - before).abs() <= bound * (1.0 + 1e-12));
            }
        }

        #[test]
        fn step_is_reproducible(g in -5.0..5.0f64, p0 in -5.0..5.0f64) {
            let s = AdaDeltaState::with_params((1, 1), 0.95, 1e-6, 0.5).unwrap();
            let a = adadelta_step(&s, &scalar(p0), &scalar(g)).unwrap();
            let b = adadelta_step(&s, &scalar(p0), &scalar(g)).unwrap();
            prop_assert_eq!(a.0.get(0, 0).to_bits(), b.0.get(0, 0).to_bits());
            prop_assert_eq!(a.1, b.1);
        }
    }
}

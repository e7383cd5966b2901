//! AdaDelta on `f(w) = w^2` from `w = 1`, printing each step.

use acmvl::optim::{adadelta_step, AdaDeltaState};
use acmvl::{Matrix, Result};

pub fn run_example(steps: usize) -> Result<Vec<f64>> {
    let mut state = AdaDeltaState::with_params((1, 1), 0.95, 1e-6, 1.0)?;
    let mut w = Matrix::new(1, 1, vec![1.0])?;
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let grad = w.scale(2.0);
        let (next, next_state) = adadelta_step(&state, &w, &grad)?;
        w = next;
        state = next_state;
        trace.push(w.get(0, 0));
    }
    Ok(trace)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    for (t, w) in run_example(10)?.iter().enumerate() {
        println!("step {:>2}  w = {w:.10}", t + 1);
    }
    Ok(())
}

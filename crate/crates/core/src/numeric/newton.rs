//! Damped Newton iteration with Armijo backtracking for smooth convex
//! objectives.

use nalgebra::{DMatrix, DVector};

use crate::error::{GarError, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop once the gradient sup-norm falls below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Gradient and Hessian at `x`.
    fn derivatives(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn minimize<O: SmoothObjective>(
    objective: &O,
    start: &[f64],
    opts: NewtonOptions,
) -> Result<NewtonOutcome> {
    let mut x = DVector::from_column_slice(start);
    let mut value = objective.value(x.as_slice());
    let mut iterations = 0;
    loop {
        let (grad, hess) = objective.derivatives(x.as_slice());
        let gnorm = sup_norm(&grad);
        if !gnorm.is_finite() || !value.is_finite() {
            return Err(GarError::NonConvergence {
                solver: "newton",
                iterations,
                residual: gnorm,
            });
        }
        if gnorm < opts.gradient_tolerance {
            return Ok(NewtonOutcome {
                x: x.as_slice().to_vec(),
                value,
                gradient_norm: gnorm,
                iterations,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(GarError::NonConvergence {
                solver: "newton",
                iterations,
                residual: gnorm,
            });
        }
        iterations += 1;

        let chol = hess
            .cholesky()
            .ok_or(GarError::SingularCurvature("Hessian is not positive definite"))?;
        let step = -chol.solve(&grad);
        let slope = grad.dot(&step);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &step;
            let v = objective.value(trial.as_slice());
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                accepted = Some((trial, v));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, v)) => {
                x = trial;
                value = v;
            }
            None => {
                // Near the optimum the objective is flat to rounding; a full
                // step is still safe if it shrinks the gradient.
                let trial = &x + &step;
                let (g_trial, _) = objective.derivatives(trial.as_slice());
                if sup_norm(&g_trial) < gnorm {
                    value = objective.value(trial.as_slice());
                    x = trial;
                } else {
                    return Err(GarError::NonConvergence {
                        solver: "newton line search",
                        iterations,
                        residual: gnorm,
                    });
                }
            }
        }
    }
}

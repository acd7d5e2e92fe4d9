//! Batch gradient descent with momentum.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::network::MlpNetwork;
use crate::neural::objective::{norm2, Counted, MlpObjective, Objective, GRAD_FLOOR, MSE_FLOOR};
use crate::neural::report::{Termination, TrainReport};

/// Gradient-descent hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GdConfig {
    /// Learning rate, > 0.
    pub learning_rate: f64,
    /// Momentum on the previous update, in [0, 1).
    pub momentum: f64,
    pub epochs: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 600,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trains a network by full-batch gradient descent: each epoch applies the
/// update `step = -lr * grad + momentum * previous_step`.
pub fn gd_train(
    net: &mut MlpNetwork,
    x: &Matrix,
    y: &Matrix,
    config: &GdConfig,
) -> Result<TrainReport> {
    config.validate()?;
    net.check_batch(x, y)?;
    let objective = MlpObjective::new(net.shape(), x, y);
    let mut params = net.to_params();
    let report = gd_minimize(&objective, &mut params, config)?;
    net.set_params(&params)?;
    Ok(report)
}

/// Gradient-descent core over any differentiable objective.
pub fn gd_minimize<O: Objective>(
    objective: &O,
    params: &mut [f64],
    config: &GdConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let mut obj = Counted::new(objective);
    let dim = obj.dim();
    let mut grad = vec![0.0; dim];
    let mut velocity = vec![0.0; dim];
    let mut curve = Vec::new();
    let mut termination = Termination::EpochLimit;

    for epoch in 1..=config.epochs {
        obj.gradient_into(params, &mut grad);
        if norm2(&grad) <= GRAD_FLOOR {
            termination = Termination::GradientFloor;
            break;
        }
        for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = -config.learning_rate * g + config.momentum * *v;
            *p += *v;
        }
        let loss = obj.loss(params);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(loss);
        if loss <= MSE_FLOOR {
            termination = Termination::MseFloor;
            break;
        }
    }

    Ok(TrainReport {
        epochs: curve.len(),
        mse_curve: curve,
        termination,
        grad_evals: obj.grad_evals,
        loss_evals: obj.loss_evals,
    })
}

//! Scaled conjugate gradient: conjugate directions without a line search.
//!
//! Curvature along the search direction is estimated from a gradient
//! difference at a small sigma-scaled offset, and the step size comes from a
//! trust-region scale lambda instead of a line search. The comparison
//! parameter delta measures how well the local quadratic model predicted the
//! actual loss change: above 0.75 the scale is halved, below 0.25 it is
//! quadrupled, and a negative value rejects the step outright (weights stay
//! put, the scale grows, the cached curvature is reused).
//!
//! Each completed iteration costs exactly two gradient evaluations: one at
//! the current weights and one for the curvature estimate. Rejected trials
//! cost only loss evaluations.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::network::MlpNetwork;
use crate::neural::objective::{dot, norm2, Counted, MlpObjective, Objective, GRAD_FLOOR, MSE_FLOOR};
use crate::neural::report::{Termination, TrainReport};

/// Relative offset for the curvature finite difference.
const SIGMA: f64 = 1e-4;
/// Initial trust-region scale.
const LAMBDA_INIT: f64 = 1e-6;
/// Scale ceiling; beyond it no usable step exists and training stalls.
const LAMBDA_CEILING: f64 = 1e25;

/// Optimizer scratch for a scaled-conjugate-gradient run.
#[derive(Clone, Debug)]
pub struct ScgState {
    /// Search direction `p`.
    pub direction: Vec<f64>,
    /// Negative gradient `r` at the current weights.
    pub residual: Vec<f64>,
    /// Trust-region scale.
    pub lambda: f64,
    /// Raised-scale marker from the positive-definiteness fix.
    pub lambda_bar: f64,
    /// Whether the last trial step was accepted.
    pub success: bool,
    /// Comparison parameter of the last trial.
    pub comparison: f64,
    /// Second-order estimate (curvature plus scaling) of the last trial.
    pub second_order: f64,
    raw_curvature: f64,
    dir_norm_sq: f64,
    mu: f64,
    prev_residual: Vec<f64>,
    prev_mu: f64,
    iterations: usize,
}

pub(crate) enum Prepared {
    Ready,
    GradientFloor,
}

pub(crate) enum Attempt {
    Accepted { loss: f64 },
    Rejected,
    Stalled,
}

impl ScgState {
    pub fn new(dim: usize) -> Self {
        ScgState {
            direction: vec![0.0; dim],
            residual: vec![0.0; dim],
            lambda: LAMBDA_INIT,
            lambda_bar: 0.0,
            success: true,
            comparison: 0.0,
            second_order: 0.0,
            raw_curvature: 0.0,
            dir_norm_sq: 0.0,
            mu: 0.0,
            prev_residual: Vec::new(),
            prev_mu: 0.0,
            iterations: 0,
        }
    }

    /// Sets up one iteration: refreshes the gradient, picks the conjugate
    /// direction (restarting every `dim` iterations), and estimates the
    /// curvature along it. Exactly two gradient evaluations.
    pub(crate) fn prepare<O: Objective>(
        &mut self,
        obj: &mut Counted<'_, O>,
        w: &[f64],
    ) -> Prepared {
        let dim = w.len();
        let mut grad = vec![0.0; dim];
        obj.gradient_into(w, &mut grad);
        if norm2(&grad) <= GRAD_FLOOR {
            return Prepared::GradientFloor;
        }
        let r_new: Vec<f64> = grad.iter().map(|g| -g).collect();

        let restart = self.iterations == 0 || self.iterations % dim == 0;
        if restart {
            self.direction.copy_from_slice(&r_new);
        } else {
            // Moller's beta: (|r_new|^2 - r_new . r_prev) / mu_prev.
            let beta =
                (dot(&r_new, &r_new) - dot(&r_new, &self.prev_residual)) / self.prev_mu;
            for (p, rn) in self.direction.iter_mut().zip(&r_new) {
                *p = rn + beta * *p;
            }
        }
        self.residual = r_new;
        self.mu = dot(&self.direction, &self.residual);
        if self.mu <= 0.0 {
            self.direction.copy_from_slice(&self.residual);
            self.mu = dot(&self.direction, &self.residual);
        }
        self.dir_norm_sq = dot(&self.direction, &self.direction);

        // Curvature along the direction from a gradient difference.
        let sigma_k = SIGMA / self.dir_norm_sq.sqrt();
        let offset: Vec<f64> = w
            .iter()
            .zip(&self.direction)
            .map(|(wi, pi)| wi + sigma_k * pi)
            .collect();
        let mut grad_off = vec![0.0; dim];
        obj.gradient_into(&offset, &mut grad_off);
        self.raw_curvature = self
            .direction
            .iter()
            .zip(grad_off.iter().zip(&grad))
            .map(|(p, (go, g))| p * (go - g) / sigma_k)
            .sum();

        self.lambda_bar = 0.0;
        self.refresh_second_order();
        self.iterations += 1;
        Prepared::Ready
    }

    /// `delta = kappa + lambda |p|^2`, forced positive when the raw
    /// curvature is negative enough to need it.
    fn refresh_second_order(&mut self) {
        let mut delta = self.raw_curvature + self.lambda * self.dir_norm_sq;
        if delta <= 0.0 {
            self.lambda_bar = 2.0 * (self.lambda - delta / self.dir_norm_sq);
            delta = -self.raw_curvature;
            self.lambda = self.lambda_bar;
        }
        self.second_order = delta;
    }

    /// One trust-region trial at the current scale. An accepted step updates
    /// the weights and adapts the scale; a rejected one leaves the weights
    /// unchanged and quadruples the scale. Loss evaluations only.
    pub(crate) fn attempt<O: Objective>(
        &mut self,
        obj: &mut Counted<'_, O>,
        w: &mut [f64],
        current_loss: f64,
    ) -> Attempt {
        let alpha = self.mu / self.second_order;
        let trial: Vec<f64> = w
            .iter()
            .zip(&self.direction)
            .map(|(wi, pi)| wi + alpha * pi)
            .collect();
        let loss = obj.loss(&trial);
        let delta_cmp = if loss.is_finite() {
            2.0 * self.second_order * (current_loss - loss) / (self.mu * self.mu)
        } else {
            f64::NEG_INFINITY
        };
        self.comparison = delta_cmp;

        if delta_cmp >= 0.0 {
            w.copy_from_slice(&trial);
            self.success = true;
            self.lambda_bar = 0.0;
            if delta_cmp > 0.75 {
                self.lambda *= 0.5;
            } else if delta_cmp < 0.25 {
                self.lambda *= 4.0;
            }
            self.lambda = self.lambda.max(f64::MIN_POSITIVE);
            self.prev_residual = self.residual.clone();
            self.prev_mu = self.mu;
            Attempt::Accepted { loss }
        } else {
            self.success = false;
            self.lambda *= 4.0;
            if self.lambda > LAMBDA_CEILING {
                return Attempt::Stalled;
            }
            self.refresh_second_order();
            Attempt::Rejected
        }
    }
}

/// Trains a network by scaled conjugate gradient.
pub fn scg_train(net: &mut MlpNetwork, x: &Matrix, y: &Matrix, epochs: usize) -> Result<TrainReport> {
    net.check_batch(x, y)?;
    let objective = MlpObjective::new(net.shape(), x, y);
    let mut params = net.to_params();
    let report = scg_minimize(&objective, &mut params, epochs)?;
    net.set_params(&params)?;
    Ok(report)
}

/// Scaled-conjugate-gradient core over any differentiable objective.
pub fn scg_minimize<O: Objective>(
    objective: &O,
    params: &mut Vec<f64>,
    epochs: usize,
) -> Result<TrainReport> {
    if epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    let mut obj = Counted::new(objective);
    let mut state = ScgState::new(obj.dim());
    let mut cur_loss = obj.loss(params);
    if !cur_loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    let mut curve = Vec::new();
    let mut termination = Termination::EpochLimit;

    'outer: for epoch in 1..=epochs {
        match state.prepare(&mut obj, params) {
            Prepared::GradientFloor => {
                termination = Termination::GradientFloor;
                break;
            }
            Prepared::Ready => {}
        }
        loop {
            match state.attempt(&mut obj, params, cur_loss) {
                Attempt::Accepted { loss } => {
                    cur_loss = loss;
                    curve.push(loss);
                    break;
                }
                Attempt::Rejected => continue,
                Attempt::Stalled => {
                    termination = Termination::Stalled;
                    break 'outer;
                }
            }
        }
        if !cur_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if cur_loss <= MSE_FLOOR {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::cg::tests::Quadratic;
    use crate::neural::cg::{cg_minimize, BetaVariant};

    /// `f(x) = x^2/2 + 2 sin(10 x)`: strongly non-quadratic, so the first
    /// full-size trial step overshoots and gets rejected.
    struct Wiggly;

    impl Objective for Wiggly {
        fn dim(&self) -> usize {
            1
        }
        fn loss(&self, w: &[f64]) -> f64 {
            0.5 * w[0] * w[0] + 2.0 * (10.0 * w[0]).sin()
        }
        fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
            out[0] = w[0] + 20.0 * (10.0 * w[0]).cos();
        }
    }

    #[test]
    fn rejected_step_keeps_weights_and_quadruples_lambda() {
        let wiggly = Wiggly;
        let mut obj = Counted::new(&wiggly);
        let mut state = ScgState::new(1);
        let mut w = vec![0.0];
        let loss0 = obj.loss(&w);
        assert!(matches!(state.prepare(&mut obj, &w), Prepared::Ready));
        let lambda_before = state.lambda;

        match state.attempt(&mut obj, &mut w, loss0) {
            Attempt::Rejected => {}
            other => panic!(
                "expected the overshooting step to be rejected, got {}",
                match other {
                    Attempt::Accepted { .. } => "accepted",
                    Attempt::Stalled => "stalled",
                    Attempt::Rejected => unreachable!(),
                }
            ),
        }
        assert_eq!(w, vec![0.0]);
        assert_eq!(state.lambda, 4.0 * lambda_before);
        assert!(!state.success);
        assert!(state.comparison < 0.0);

        // Retrying with the grown scale eventually accepts and decreases.
        let mut accepted = None;
        for _ in 0..60 {
            if let Attempt::Accepted { loss } = state.attempt(&mut obj, &mut w, loss0) {
                accepted = Some(loss);
                break;
            }
        }
        let loss = accepted.expect("growing lambda must shrink the step into acceptance");
        assert!(loss < loss0);
        assert!(w[0] != 0.0);
        assert!(state.success);
    }

    #[test]
    fn quadratic_matches_the_cg_minimizer() {
        let quad = Quadratic::well_conditioned(12, 0.75);
        let mut w_scg = vec![0.3; 12];
        let mut w_cg = vec![0.3; 12];
        scg_minimize(&quad, &mut w_scg, 40).unwrap();
        cg_minimize(&quad, &mut w_cg, 40, BetaVariant::FletcherReeves).unwrap();
        for (a, b) in w_scg.iter().zip(&w_cg) {
            assert!((a - b).abs() < 1e-6, "scg {a} vs cg {b}");
        }
    }

    #[test]
    fn quadratic_gradient_reaches_the_floor_within_dim_plus_two() {
        let dim = 10;
        let quad = Quadratic::well_conditioned(dim, 0.3);
        let mut w = vec![0.0; dim];
        let report = scg_minimize(&quad, &mut w, dim + 2).unwrap();
        let mut grad = vec![0.0; dim];
        quad.gradient_into(&w, &mut grad);
        assert!(
            norm2(&grad) <= 1e-6,
            "grad norm {} after {} iters",
            norm2(&grad),
            report.epochs
        );
    }

    #[test]
    fn two_gradient_evaluations_per_iteration() {
        let mut net = MlpNetwork::init(&[3, 5, 1], 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 / 30.0;
                vec![t, (6.0 * t).sin(), 1.0 - t]
            })
            .collect();
        let targets: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] * r[1]]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = Matrix::from_rows(&targets).unwrap();
        let report = scg_train(&mut net, &x, &y, 25).unwrap();
        assert_eq!(report.termination, Termination::EpochLimit);
        assert_eq!(report.epochs, 25);
        assert_eq!(report.grad_evals, 2 * report.epochs);
    }

    #[test]
    fn accepted_mse_curve_is_non_increasing() {
        let mut net = MlpNetwork::init(&[2, 6, 1], 14).unwrap();
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 / 50.0;
                vec![t, t * t]
            })
            .collect();
        let targets: Vec<Vec<f64>> = rows.iter().map(|r| vec![(4.0 * r[0]).cos()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = Matrix::from_rows(&targets).unwrap();
        let report = scg_train(&mut net, &x, &y, 80).unwrap();
        for pair in report.mse_curve.windows(2) {
            assert!(pair[1] <= pair[0], "curve rose: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn converged_start_stops_with_gradient_floor_and_no_epochs() {
        let mut net = MlpNetwork::init(&[2, 3, 1], 30).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -0.5], vec![0.25, 0.75]]).unwrap();
        let y = net.predict_batch(&x).unwrap();
        let report = scg_train(&mut net, &x, &y, 10).unwrap();
        assert_eq!(report.termination, Termination::GradientFloor);
        assert_eq!(report.epochs, 0);
    }
}

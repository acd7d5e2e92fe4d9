//! Conjugate-gradient training with a line search.
//!
//! Each iteration minimizes the loss along the current search direction,
//! refreshes the gradient, and mixes the new steepest-descent direction with
//! the previous one through the beta coefficient. Directions reset to plain
//! steepest descent every `dim` iterations, on a non-descent direction, or
//! after a failed line search.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::network::MlpNetwork;
use crate::neural::objective::{dot, norm2, Counted, MlpObjective, Objective, GRAD_FLOOR, MSE_FLOOR};
use crate::neural::report::{Termination, TrainReport};

/// How the direction-mixing coefficient is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaVariant {
    /// `|g_new|^2 / |g_old|^2`.
    FletcherReeves,
    /// `g_new . (g_new - g_old) / |g_old|^2`.
    PolakRibiere,
}

/// Gradient and direction state of a conjugate-gradient run.
#[derive(Clone, Debug)]
pub struct CgState {
    pub gradient: Vec<f64>,
    pub direction: Vec<f64>,
    pub beta_variant: BetaVariant,
}

impl CgState {
    /// Initial state: the search starts along steepest descent.
    pub fn new(gradient: Vec<f64>, beta_variant: BetaVariant) -> Self {
        let direction = gradient.iter().map(|g| -g).collect();
        CgState {
            gradient,
            direction,
            beta_variant,
        }
    }
}

/// Line-search budget and resolution: bracketing plus golden-section with
/// parabolic interpolation, stopping at a relative interval of `1e-4` or
/// after 20 loss evaluations.
const LINE_SEARCH_MAX_EVALS: usize = 20;
const LINE_SEARCH_REL_TOL: f64 = 1e-4;

/// Minimizes `phi` over positive steps given `phi(0) = f0`. Returns the best
/// step and value found, or `None` when no decrease below `f0` was found.
pub(crate) fn line_minimize(
    mut phi: impl FnMut(f64) -> f64,
    f0: f64,
    init_step: f64,
) -> Option<(f64, f64)> {
    let mut evals = 0;
    let budget = LINE_SEARCH_MAX_EVALS;
    let mut eval = |t: f64, evals: &mut usize| -> f64 {
        *evals += 1;
        let v = phi(t);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Find a downhill step, shrinking from the initial guess.
    let mut t = init_step.max(f64::MIN_POSITIVE);
    let mut ft = eval(t, &mut evals);
    while ft >= f0 && evals < budget / 2 {
        t *= 0.25;
        ft = eval(t, &mut evals);
    }
    if ft >= f0 {
        return None;
    }

    // Expand until the function rises again: bracket (a, b, c) with
    // f(b) < f(a) and f(b) < f(c).
    let (mut a, mut fa) = (0.0, f0);
    let (mut b, mut fb) = (t, ft);
    let mut c = t * 2.0;
    let mut fc = eval(c, &mut evals);
    while fc < fb && evals < budget {
        (a, fa) = (b, fb);
        (b, fb) = (c, fc);
        c *= 2.0;
        fc = eval(c, &mut evals);
    }
    if fc < fb {
        // Budget exhausted while still descending; take the best point seen.
        return Some((c, fc));
    }
    let _ = fa;

    // Golden-section with parabolic interpolation inside [a, c].
    let golden = 0.381_966_011_250_105_1; // 2 - golden ratio
    let (mut lo, mut hi) = (a, c);
    let mut x = b;
    let mut fx = fb;
    let (mut w, mut fw) = (x, fx);
    let (mut v, mut fv) = (x, fx);
    while evals < budget {
        let mid = 0.5 * (lo + hi);
        let tol = LINE_SEARCH_REL_TOL * x.abs() + 1e-12;
        if (x - mid).abs() + 0.5 * (hi - lo) <= 2.0 * tol {
            break;
        }
        // Parabola through (x, w, v); fall back to a golden step.
        let mut u = None;
        if x != w && x != v && w != v {
            let r = (x - w) * (fx - fv);
            let q = (x - v) * (fx - fw);
            let denom = 2.0 * (q - r);
            if denom != 0.0 {
                let cand = x - ((x - v) * q - (x - w) * r) / denom;
                if cand > lo && cand < hi && (cand - x).abs() > 1e-12 {
                    u = Some(cand);
                }
            }
        }
        let u = u.unwrap_or_else(|| {
            if x < mid {
                x + golden * (hi - x)
            } else {
                x - golden * (x - lo)
            }
        });
        let fu = eval(u, &mut evals);
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    if fx < f0 {
        Some((x, fx))
    } else {
        None
    }
}

/// Trains a network by conjugate gradient.
pub fn cg_train(
    net: &mut MlpNetwork,
    x: &Matrix,
    y: &Matrix,
    epochs: usize,
    beta_variant: BetaVariant,
) -> Result<TrainReport> {
    net.check_batch(x, y)?;
    let objective = MlpObjective::new(net.shape(), x, y);
    let mut params = net.to_params();
    let report = cg_minimize(&objective, &mut params, epochs, beta_variant)?;
    net.set_params(&params)?;
    Ok(report)
}

/// Conjugate-gradient core over any differentiable objective.
pub fn cg_minimize<O: Objective>(
    objective: &O,
    params: &mut Vec<f64>,
    epochs: usize,
    beta_variant: BetaVariant,
) -> Result<TrainReport> {
    cg_minimize_observed(objective, params, epochs, beta_variant, |_| {})
}

/// Like [`cg_minimize`], reporting each iteration's search direction before
/// the step is taken.
pub(crate) fn cg_minimize_observed<O: Objective>(
    objective: &O,
    params: &mut Vec<f64>,
    epochs: usize,
    beta_variant: BetaVariant,
    mut on_direction: impl FnMut(&[f64]),
) -> Result<TrainReport> {
    if epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    let mut obj = Counted::new(objective);
    let dim = obj.dim();
    let mut grad = vec![0.0; dim];
    obj.gradient_into(params, &mut grad);
    let mut state = CgState::new(grad, beta_variant);
    let mut cur_loss = obj.loss(params);
    let mut curve = Vec::new();
    let mut termination = Termination::EpochLimit;
    let mut trial = vec![0.0; dim];

    'outer: for epoch in 1..=epochs {
        if norm2(&state.gradient) <= GRAD_FLOOR {
            termination = Termination::GradientFloor;
            break;
        }
        if cur_loss <= MSE_FLOOR {
            termination = Termination::MseFloor;
            break;
        }
        if !cur_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        on_direction(&state.direction);
        let mut searched_steepest = state
            .direction
            .iter()
            .zip(&state.gradient)
            .all(|(d, g)| *d == -g);
        let step = loop {
            let dnorm = norm2(&state.direction);
            let init_step = 1.0 / (1.0 + dnorm);
            let found = {
                let direction = &state.direction;
                let obj_ref = &mut obj;
                let trial_ref = &mut trial;
                let params_ref = &*params;
                line_minimize(
                    |a| {
                        for ((t, p), d) in
                            trial_ref.iter_mut().zip(params_ref.iter()).zip(direction)
                        {
                            *t = p + a * d;
                        }
                        obj_ref.loss(trial_ref)
                    },
                    cur_loss,
                    init_step,
                )
            };
            match found {
                Some(hit) => break hit,
                None if !searched_steepest => {
                    // Failed line search: reset to steepest descent and retry.
                    for (d, g) in state.direction.iter_mut().zip(&state.gradient) {
                        *d = -g;
                    }
                    searched_steepest = true;
                }
                None => {
                    termination = Termination::Stalled;
                    break 'outer;
                }
            }
        };
        let (a_min, f_min) = step;
        for (p, d) in params.iter_mut().zip(&state.direction) {
            *p += a_min * d;
        }

        let mut new_grad = vec![0.0; dim];
        obj.gradient_into(params, &mut new_grad);
        let denom = dot(&state.gradient, &state.gradient);
        let beta = if denom > 0.0 {
            match beta_variant {
                BetaVariant::FletcherReeves => dot(&new_grad, &new_grad) / denom,
                BetaVariant::PolakRibiere => {
                    (dot(&new_grad, &new_grad) - dot(&new_grad, &state.gradient)) / denom
                }
            }
        } else {
            0.0
        };
        for (d, g) in state.direction.iter_mut().zip(&new_grad) {
            *d = beta * *d - g;
        }
        // Periodic restart, and a safeguard against non-descent directions.
        if epoch % dim == 0 || dot(&state.direction, &new_grad) >= 0.0 {
            for (d, g) in state.direction.iter_mut().zip(&new_grad) {
                *d = -g;
            }
        }
        state.gradient = new_grad;
        cur_loss = f_min;
        curve.push(f_min);
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
pub(crate) mod tests {
    use super::*;

    /// Convex quadratic `E(w) = 0.5 w' A w - b' w + c0` with SPD `A`.
    pub(crate) struct Quadratic {
        pub a: Vec<Vec<f64>>,
        pub b: Vec<f64>,
        pub c0: f64,
    }

    impl Quadratic {
        /// Diagonally dominant SPD instance whose minimum value is `shift`,
        /// so the loss floor never fires before the gradient floor.
        pub fn well_conditioned(dim: usize, shift: f64) -> Self {
            let mut a = vec![vec![0.0; dim]; dim];
            for i in 0..dim {
                for j in 0..dim {
                    a[i][j] = if i == j {
                        2.0 + (i as f64) * 0.1
                    } else {
                        0.5 / (1.0 + (i as f64 - j as f64).abs())
                    };
                }
            }
            // Make it symmetric diagonally dominant.
            for i in 0..dim {
                let off: f64 = (0..dim).filter(|&j| j != i).map(|j| a[i][j].abs()).sum();
                a[i][i] = off + 1.0 + (i as f64) * 0.05;
            }
            let solution: Vec<f64> = (0..dim).map(|i| ((i as f64) * 0.7).sin()).collect();
            let b: Vec<f64> = (0..dim)
                .map(|i| (0..dim).map(|j| a[i][j] * solution[j]).sum())
                .collect();
            let half_sas: f64 = 0.5
                * solution
                    .iter()
                    .zip(&b)
                    .map(|(s, bi)| s * bi)
                    .sum::<f64>();
            Quadratic {
                a,
                b,
                c0: shift + half_sas,
            }
        }
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn loss(&self, w: &[f64]) -> f64 {
            let mut acc = self.c0;
            for i in 0..w.len() {
                let mut aw = 0.0;
                for j in 0..w.len() {
                    aw += self.a[i][j] * w[j];
                }
                acc += 0.5 * w[i] * aw - self.b[i] * w[i];
            }
            acc
        }
        fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
            for i in 0..w.len() {
                let mut aw = 0.0;
                for j in 0..w.len() {
                    aw += self.a[i][j] * w[j];
                }
                out[i] = aw - self.b[i];
            }
        }
    }

    #[test]
    fn line_search_is_exact_on_a_parabola() {
        let (a, f) = line_minimize(|t| (t - 0.37) * (t - 0.37) + 2.0, 0.37 * 0.37 + 2.0, 1.0)
            .expect("decrease exists");
        assert!((a - 0.37).abs() < 1e-8, "a = {a}");
        assert!((f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_search_reports_failure_on_an_increasing_function() {
        assert!(line_minimize(|t| 1.0 + t, 1.0, 1.0).is_none());
    }

    #[test]
    fn first_iteration_is_steepest_descent() {
        let quad = Quadratic::well_conditioned(4, 1.0);
        let mut params = vec![1.0, -0.5, 0.25, 2.0];
        let mut g0 = vec![0.0; 4];
        quad.gradient_into(&params, &mut g0);
        let mut first: Option<Vec<f64>> = None;
        cg_minimize_observed(&quad, &mut params, 3, BetaVariant::FletcherReeves, |d| {
            if first.is_none() {
                first = Some(d.to_vec());
            }
        })
        .unwrap();
        let first = first.unwrap();
        for (d, g) in first.iter().zip(&g0) {
            assert_eq!(*d, -g);
        }
    }

    #[test]
    fn quadratic_terminates_within_dim_plus_two_iterations() {
        for variant in [BetaVariant::FletcherReeves, BetaVariant::PolakRibiere] {
            let quad = Quadratic::well_conditioned(8, 0.5);
            let mut params = vec![0.0; 8];
            let report = cg_minimize(&quad, &mut params, 10, variant).unwrap();
            let mut grad = vec![0.0; 8];
            quad.gradient_into(&params, &mut grad);
            assert!(
                norm2(&grad) <= 1e-6,
                "{:?}: grad norm {} after {} iters",
                variant,
                norm2(&grad),
                report.epochs
            );
            assert!(report.epochs <= 10);
        }
    }

    #[test]
    fn directions_are_conjugate_on_a_quadratic() {
        let dim = 6;
        let quad = Quadratic::well_conditioned(dim, 0.25);
        let mut params = vec![0.5; dim];
        let mut directions: Vec<Vec<f64>> = Vec::new();
        cg_minimize_observed(&quad, &mut params, dim, BetaVariant::FletcherReeves, |d| {
            directions.push(d.to_vec())
        })
        .unwrap();
        // Directions deep in the rounding regime (norms many orders below
        // the first) are cancellation noise, not search directions.
        let d0_norm = norm2(&directions[0]);
        directions.retain(|d| norm2(d) > 1e-6 * d0_norm);
        assert!(directions.len() >= 3);
        let h_dot = |a: &[f64], b: &[f64]| {
            let mut acc = 0.0;
            for r in 0..dim {
                for c in 0..dim {
                    acc += a[r] * quad.a[r][c] * b[c];
                }
            }
            acc
        };
        for i in 0..directions.len() {
            for j in 0..i {
                let di = &directions[i];
                let dj = &directions[j];
                let num = h_dot(di, dj).abs();
                let scale = (h_dot(di, di) * h_dot(dj, dj)).sqrt();
                assert!(
                    num <= 1e-6 * scale,
                    "directions {j} and {i} not conjugate: {num} vs {scale}"
                );
            }
        }
    }

    #[test]
    fn converged_start_terminates_immediately_with_gradient_floor() {
        let mut net = MlpNetwork::init(&[3, 2, 1], 12).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, -0.3], vec![0.4, -0.5, 0.6]]).unwrap();
        let y = net.predict_batch(&x).unwrap();
        let report = cg_train(&mut net, &x, &y, 50, BetaVariant::FletcherReeves).unwrap();
        assert_eq!(report.termination, Termination::GradientFloor);
        assert_eq!(report.epochs, 0);
    }

    #[test]
    fn mlp_loss_decreases_under_cg() {
        let mut net = MlpNetwork::init(&[2, 4, 1], 1).unwrap();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                vec![t, 1.0 - t]
            })
            .collect();
        let targets: Vec<Vec<f64>> = rows.iter().map(|r| vec![(3.0 * r[0]).sin()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = Matrix::from_rows(&targets).unwrap();
        let before = net.loss(&x, &y).unwrap();
        let report = cg_train(&mut net, &x, &y, 60, BetaVariant::FletcherReeves).unwrap();
        let after = net.loss(&x, &y).unwrap();
        assert!(after < before * 0.5, "before {before} after {after}");
        for pair in report.mse_curve.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
        }
    }
}

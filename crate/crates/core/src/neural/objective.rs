//! Differentiable objectives for the trainers.

use crate::linalg::Matrix;
use crate::neural::network::NetShape;

/// Gradient-norm stopping floor shared by all trainers.
pub const GRAD_FLOOR: f64 = 1e-8;
/// Loss stopping floor shared by all trainers.
pub const MSE_FLOOR: f64 = 1e-12;

/// A differentiable scalar objective over a flat parameter vector.
///
/// The trainers are written against this trait so they can be exercised on
/// closed-form objectives as well as network losses.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss(&self, params: &[f64]) -> f64;
    fn gradient_into(&self, params: &[f64], out: &mut [f64]);
}

/// Wraps an objective and counts evaluations.
pub struct Counted<'a, O: Objective + ?Sized> {
    inner: &'a O,
    pub loss_evals: usize,
    pub grad_evals: usize,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Counted {
            inner,
            loss_evals: 0,
            grad_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn loss(&mut self, params: &[f64]) -> f64 {
        self.loss_evals += 1;
        self.inner.loss(params)
    }

    pub fn gradient_into(&mut self, params: &[f64], out: &mut [f64]) {
        self.grad_evals += 1;
        self.inner.gradient_into(params, out);
    }
}

/// Batch MSE of a network over a dataset.
pub(crate) struct MlpObjective<'a> {
    shape: NetShape,
    x: &'a Matrix,
    y: &'a Matrix,
}

impl<'a> MlpObjective<'a> {
    pub fn new(shape: NetShape, x: &'a Matrix, y: &'a Matrix) -> Self {
        MlpObjective { shape, x, y }
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.shape.param_count()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        self.shape.loss(params, self.x, self.y, false)
    }

    fn gradient_into(&self, params: &[f64], out: &mut [f64]) {
        self.shape.gradient_into(params, self.x, self.y, out, false);
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Feedforward networks and their trainers.
//!
//! [`MlpNetwork`] is a dense multilayer perceptron with log-sigmoid hidden
//! layers. Three batch trainers share the same stopping rules (epoch cap,
//! gradient-norm floor `1e-8`, loss floor `1e-12`):
//!
//! - [`gd_train`]: gradient descent with momentum,
//! - [`cg_train`]: conjugate gradient with a bracketing line search,
//! - [`scg_train`]: scaled conjugate gradient, line-search-free with exactly
//!   two gradient evaluations per iteration.
//!
//! The minimizer cores ([`gd_minimize`], [`cg_minimize`], [`scg_minimize`])
//! accept any [`Objective`], not just network losses.

mod cg;
mod gd;
mod network;
mod objective;
mod report;
mod scg;

pub use cg::{cg_minimize, cg_train, BetaVariant, CgState};
pub use gd::{gd_minimize, gd_train, GdConfig};
pub use network::{Activation, MlpNetwork};
pub use objective::{Counted, Objective, GRAD_FLOOR, MSE_FLOOR};
pub use report::{Termination, TrainReport};
pub use scg::{scg_minimize, scg_train, ScgState};

#[doc(hidden)]
pub mod bench_support {
    //! Hooks for the criterion benches: batch gradients with and without the
    //! parallel chunk map.

    use crate::linalg::Matrix;
    use crate::neural::network::MlpNetwork;

    pub fn batch_gradient(net: &MlpNetwork, x: &Matrix, y: &Matrix, sequential: bool) -> Vec<f64> {
        let shape = net.shape();
        let mut out = vec![0.0; shape.param_count()];
        shape.gradient_into(&net.to_params(), x, y, &mut out, sequential);
        out
    }
}

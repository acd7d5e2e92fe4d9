//! Adaptive regression splines: hinge basis functions, greedy forward
//! selection, and GCV-guided backward pruning.

mod fit;
mod model;

pub use fit::{
    backward_prune, candidate_knots, fit, forward_pass, gcv_score, ForwardStep, ForwardTrace,
    MarsFitConfig, PruneStep, PruneTrace,
};
pub use model::{
    hinge_eval, BasisFunction, FitDiagnostics, HingeDirection, HingeTerm, MarsModel, ModelTerm,
};

#[doc(hidden)]
pub use fit::bench_support;

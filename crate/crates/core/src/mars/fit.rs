//! Greedy forward selection and backward pruning for spline models.
//!
//! The forward pass starts from a constant and repeatedly adds the hinge pair
//! (primary plus mirror, sharing one knot) whose post-addition least-squares
//! refit has the lowest training MSE. Backward pruning then removes one basis
//! at a time, always the one whose removal hurts training MSE the least, and
//! the model with the lowest GCV along that sequence wins.
//!
//! Every candidate is scored by a full least-squares refit through the same
//! pivoted-QR solver used everywhere else; there is no incremental update
//! algebra, so the scan is exactly the naive refit. Candidate scoring may run
//! on rayon, but scores are materialized in candidate order and the winner is
//! picked by a sequential scan with a total tie-break order (lowest variable,
//! then lowest knot, then lowest parent id), so results do not depend on the
//! thread count.

use std::cell::RefCell;
use std::io::Write;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{LstsqWorkspace, Matrix};
use crate::mars::model::{
    count_knots, BasisFunction, HingeDirection, HingeTerm, MarsModel, ModelTerm,
};

/// Knobs for [`fit`], [`forward_pass`] and [`backward_prune`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarsFitConfig {
    /// Upper limit on basis functions added by the forward pass. Pairs are
    /// never split, so an odd limit leaves one slot unused.
    pub max_basis_functions: usize,
    /// Minimum observations between consecutive candidate knots.
    pub min_span: usize,
    /// Maximum factors per basis function; 1 keeps the model additive.
    pub max_interaction_degree: usize,
    /// GCV cost per knot, in effective parameters.
    pub gcv_penalty: f64,
}

impl Default for MarsFitConfig {
    fn default() -> Self {
        MarsFitConfig {
            max_basis_functions: 15,
            min_span: 1,
            max_interaction_degree: 1,
            gcv_penalty: 2.0,
        }
    }
}

impl MarsFitConfig {
    /// Defaults for a given interaction degree: penalty 2 for additive
    /// models, 3 once interactions are allowed.
    pub fn for_degree(degree: usize) -> Self {
        MarsFitConfig {
            max_interaction_degree: degree,
            gcv_penalty: if degree > 1 { 3.0 } else { 2.0 },
            ..MarsFitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_basis_functions < 1 {
            return Err(Error::Config("max_basis_functions must be >= 1".into()));
        }
        if self.min_span < 1 {
            return Err(Error::Config("min_span must be >= 1".into()));
        }
        if self.max_interaction_degree < 1 {
            return Err(Error::Config("max_interaction_degree must be >= 1".into()));
        }
        if !(self.gcv_penalty >= 0.0) {
            return Err(Error::Config("gcv_penalty must be >= 0".into()));
        }
        Ok(())
    }
}

/// MSE decrease below which a forward-step candidate counts as no
/// improvement, as a fraction of the intercept-only MSE. Floating-point
/// floor; keeps the forward pass from chasing rounding noise once the fit is
/// essentially exact.
const IMPROVEMENT_TOL: f64 = 1e-12;

/// One forward-pass addition (a hinge pair shares one trace entry).
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardStep {
    /// 1-based addition step.
    pub step: usize,
    pub variable: usize,
    pub knot: f64,
    /// Parent basis id: 0 for the intercept, otherwise the 1-based creation
    /// id of the parent basis function.
    pub parent: usize,
    /// Training MSE after the pair is added and refit.
    pub mse: f64,
}

/// Log of forward-pass additions; `mse` is non-increasing by construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardTrace {
    /// Training MSE of the intercept-only start.
    pub initial_mse: f64,
    pub steps: Vec<ForwardStep>,
}

impl ForwardTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,variable,knot,parent,mse")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{},{}", s.step, s.variable, s.knot, s.parent, s.mse)?;
        }
        Ok(())
    }
}

/// One backward-pruning removal.
#[derive(Clone, Debug, PartialEq)]
pub struct PruneStep {
    /// 1-based removal step.
    pub step: usize,
    /// 1-based id of the removed basis (its position in the overfit model).
    pub removed: usize,
    /// Training MSE after the removal and refit.
    pub mse: f64,
    /// GCV of the model after the removal.
    pub gcv: f64,
}

/// Log of backward-pruning removals down to the intercept-only model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PruneTrace {
    /// GCV of the unpruned input model.
    pub unpruned_gcv: f64,
    pub steps: Vec<PruneStep>,
    /// Index of the GCV-minimal model in the removal sequence: 0 is the
    /// unpruned model, `k` the model after `k` removals. Ties go to the
    /// smaller model.
    pub best_index: usize,
}

impl PruneTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,removed_basis,mse,gcv")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{}", s.step, s.removed, s.mse, s.gcv)?;
        }
        Ok(())
    }
}

/// Candidate knot locations for one predictor column.
///
/// `column` must be sorted ascending. Knots are distinct observed values,
/// excluding the maximum (a positive hinge there is identically zero on the
/// data), keeping at least `min_span` observations between consecutive
/// selected knots.
pub fn candidate_knots(column: &[f64], min_span: usize) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(Error::Data("candidate_knots: empty column".into()));
    }
    if min_span < 1 {
        return Err(Error::Config("min_span must be >= 1".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictor column".into()));
    }
    if !column.is_sorted() {
        return Err(Error::Data("candidate_knots: column must be sorted".into()));
    }

    let max = *column.last().unwrap();
    let mut knots = Vec::new();
    let mut run_start = 0;
    let mut since_last = 0usize;
    while run_start < column.len() {
        let v = column[run_start];
        let mut run_end = run_start + 1;
        while run_end < column.len() && column[run_end] == v {
            run_end += 1;
        }
        if v == max {
            break;
        }
        let count = run_end - run_start;
        if knots.is_empty() || since_last + count >= min_span {
            knots.push(v);
            since_last = 0;
        } else {
            since_last += count;
        }
        run_start = run_end;
    }
    Ok(knots)
}

/// Generalized cross-validation score: `mse / (1 - C/N)^2` where `C` is the
/// effective parameter count. Returns +inf once `C >= N`.
pub fn gcv_score(mse: f64, n_samples: usize, n_effective_params: f64) -> f64 {
    assert!(n_samples > 0, "gcv_score needs samples");
    assert!(
        n_effective_params >= 0.0,
        "effective parameter count cannot be negative"
    );
    let n = n_samples as f64;
    if n_effective_params >= n {
        return f64::INFINITY;
    }
    let denom = 1.0 - n_effective_params / n;
    mse / (denom * denom)
}

thread_local! {
    static SOLVER: RefCell<LstsqWorkspace> = RefCell::new(LstsqWorkspace::new());
}

struct SolveOut {
    coefficients: Vec<f64>,
    mse: f64,
    rank: usize,
}

/// Least-squares refit of `[1 | columns]` against `y`, using a per-thread
/// workspace. The shared pivoted-QR kernel keeps every scan score identical
/// to the standalone refit.
fn solve_with_intercept(columns: &[&[f64]], y: &[f64], extra: &[&[f64]]) -> SolveOut {
    let n = y.len();
    let p = 1 + columns.len() + extra.len();
    if p == 1 {
        // Intercept-only least squares is the arithmetic mean; computing it
        // directly keeps a constant target at exactly zero MSE.
        let mean = y.iter().sum::<f64>() / n as f64;
        let mse = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        return SolveOut {
            coefficients: vec![mean],
            mse,
            rank: 1,
        };
    }
    SOLVER.with(|cell| {
        let mut ws = cell.borrow_mut();
        ws.reset(n, p);
        ws.column_mut(0).fill(1.0);
        for (j, col) in columns.iter().chain(extra.iter()).enumerate() {
            ws.column_mut(j + 1).copy_from_slice(col);
        }
        ws.target_mut().copy_from_slice(y);
        let out = ws.solve();
        SolveOut {
            coefficients: ws.coefficients().to_vec(),
            mse: out.mse,
            rank: out.rank,
        }
    })
}

#[derive(Clone, Copy)]
struct Candidate {
    /// Index into the current basis list, or `usize::MAX` for the intercept.
    parent: usize,
    variable: usize,
    knot: f64,
}

impl Candidate {
    fn parent_id(&self) -> usize {
        if self.parent == usize::MAX {
            0
        } else {
            self.parent + 1
        }
    }
}

struct FitState<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    config: &'a MarsFitConfig,
    knots: Vec<Vec<f64>>,
    bases: Vec<BasisFunction>,
    columns: Vec<Vec<f64>>,
}

impl<'a> FitState<'a> {
    fn new(x: &'a Matrix, y: &'a [f64], config: &'a MarsFitConfig) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::Data("fit needs a non-empty design matrix".into()));
        }
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictor matrix".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target vector".into()));
        }
        config.validate()?;

        let knots = (0..x.cols())
            .map(|v| {
                let mut col = x.column(v);
                col.sort_by(f64::total_cmp);
                candidate_knots(&col, config.min_span)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FitState {
            x,
            y,
            config,
            knots,
            bases: Vec::new(),
            columns: Vec::new(),
        })
    }

    fn column_refs(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| c.as_slice()).collect()
    }

    fn parent_column(&self, parent: usize) -> Option<&[f64]> {
        if parent == usize::MAX {
            None
        } else {
            Some(&self.columns[parent])
        }
    }

    /// Hinge-pair columns for a candidate, multiplied into the parent basis.
    fn pair_columns(&self, cand: &Candidate) -> (Vec<f64>, Vec<f64>) {
        let n = self.x.rows();
        let parent = self.parent_column(cand.parent);
        let mut pos = vec![0.0; n];
        let mut mir = vec![0.0; n];
        for i in 0..n {
            let scale = parent.map_or(1.0, |p| p[i]);
            if scale == 0.0 {
                continue;
            }
            let x = self.x.get(i, cand.variable);
            let d = x - cand.knot;
            if d > 0.0 {
                pos[i] = scale * d;
            } else if d < 0.0 {
                mir[i] = scale * -d;
            }
        }
        (pos, mir)
    }

    fn enumerate_candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::new();
        let parents = std::iter::once(usize::MAX).chain(0..self.bases.len());
        for parent in parents {
            if parent != usize::MAX {
                let b = &self.bases[parent];
                if b.degree() >= self.config.max_interaction_degree {
                    continue;
                }
            }
            for variable in 0..self.x.cols() {
                if parent != usize::MAX
                    && self.bases[parent]
                        .factors
                        .iter()
                        .any(|f| f.variable == variable)
                {
                    continue;
                }
                for &knot in &self.knots[variable] {
                    out.push(Candidate {
                        parent,
                        variable,
                        knot,
                    });
                }
            }
        }
        out
    }

    /// Post-addition training MSE for every candidate, in candidate order.
    fn score_candidates(&self, candidates: &[Candidate], sequential: bool) -> Vec<f64> {
        let existing = self.column_refs();
        let score = |ci: usize| {
            let cand = &candidates[ci];
            let (pos, mir) = self.pair_columns(cand);
            solve_with_intercept(&existing, self.y, &[&pos, &mir]).mse
        };
        if sequential {
            exec::map_indexed_seq(candidates.len(), score)
        } else {
            exec::map_indexed(candidates.len(), score)
        }
    }

    fn push_pair(&mut self, cand: &Candidate) -> Result<()> {
        let (pos, mir) = self.pair_columns(cand);
        for (direction, col) in [(HingeDirection::Positive, pos), (HingeDirection::Mirror, mir)] {
            let mut factors = if cand.parent == usize::MAX {
                Vec::new()
            } else {
                self.bases[cand.parent].factors.clone()
            };
            factors.push(HingeTerm {
                variable: cand.variable,
                knot: cand.knot,
                direction,
            });
            self.bases.push(BasisFunction::new(factors)?);
            self.columns.push(col);
        }
        Ok(())
    }

    fn effective_params(&self, rank: usize, terms: &[ModelTerm]) -> f64 {
        rank as f64 + self.config.gcv_penalty * count_knots(terms) as f64
    }

    fn model_from_solve(&self, solve: &SolveOut) -> Result<MarsModel> {
        let terms: Vec<ModelTerm> = self
            .bases
            .iter()
            .zip(&solve.coefficients[1..])
            .map(|(basis, &coefficient)| ModelTerm {
                coefficient,
                basis: basis.clone(),
            })
            .collect();
        let c = self.effective_params(solve.rank, &terms);
        let gcv = gcv_score(solve.mse, self.y.len(), c);
        MarsModel::new(solve.coefficients[0], terms, self.x.cols(), solve.mse, gcv)
    }
}

/// Greedy forward pass: intercept plus hinge pairs until the basis budget,
/// the improvement floor, or candidate exhaustion stops it.
///
/// Constant targets and all-constant predictors are not errors; they produce
/// an intercept-only model.
pub fn forward_pass(
    x: &Matrix,
    y: &[f64],
    config: &MarsFitConfig,
) -> Result<(MarsModel, ForwardTrace)> {
    let mut state = FitState::new(x, y, config)?;
    let base = solve_with_intercept(&[], y, &[]);
    let mut trace = ForwardTrace {
        initial_mse: base.mse,
        ..ForwardTrace::default()
    };
    let mut current_mse = base.mse;
    let mut step = 0;

    loop {
        if state.bases.len() + 2 > config.max_basis_functions {
            break;
        }
        if current_mse <= 0.0 {
            break;
        }
        let candidates = state.enumerate_candidates();
        if candidates.is_empty() {
            break;
        }
        let scores = state.score_candidates(&candidates, false);

        let mut best: Option<(usize, f64)> = None;
        for (ci, &mse) in scores.iter().enumerate() {
            let better = match best {
                None => true,
                Some((bi, bmse)) => {
                    let c = &candidates[ci];
                    let b = &candidates[bi];
                    match mse.total_cmp(&bmse) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Greater => false,
                        std::cmp::Ordering::Equal => (c.variable, c.knot, c.parent_id())
                            < (b.variable, b.knot, b.parent_id()),
                    }
                }
            };
            if better {
                best = Some((ci, mse));
            }
        }
        let (best_idx, best_mse) = best.unwrap();
        let improvement = current_mse - best_mse;
        if !(improvement > IMPROVEMENT_TOL * base.mse) {
            break;
        }

        let chosen = candidates[best_idx];
        state.push_pair(&chosen)?;
        step += 1;
        trace.steps.push(ForwardStep {
            step,
            variable: chosen.variable,
            knot: chosen.knot,
            parent: chosen.parent_id(),
            mse: best_mse,
        });
        current_mse = best_mse;
    }

    let solve = solve_with_intercept(&state.column_refs(), y, &[]);
    let model = state.model_from_solve(&solve)?;
    Ok((model, trace))
}

/// Backward pruning: repeatedly drop the basis whose removal leaves the
/// lowest training MSE, refitting each time, down to the intercept-only
/// model; return the GCV-minimal model of the sequence.
pub fn backward_prune(
    overfit: &MarsModel,
    x: &Matrix,
    y: &[f64],
    config: &MarsFitConfig,
) -> Result<(MarsModel, PruneTrace)> {
    if overfit.n_predictors != x.cols() {
        return Err(Error::Shape(format!(
            "model expects {} predictors, matrix has {}",
            overfit.n_predictors,
            x.cols()
        )));
    }
    if x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    config.validate()?;

    let n = y.len();
    let all_columns: Vec<Vec<f64>> = overfit
        .terms
        .iter()
        .map(|t| {
            (0..n)
                .map(|i| t.basis.eval(x.row(i)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let subset_fit = |surviving: &[usize]| -> SolveOut {
        let cols: Vec<&[f64]> = surviving.iter().map(|&t| all_columns[t].as_slice()).collect();
        solve_with_intercept(&cols, y, &[])
    };
    let subset_gcv = |surviving: &[usize], solve: &SolveOut| -> f64 {
        let terms: Vec<ModelTerm> = surviving
            .iter()
            .map(|&t| overfit.terms[t].clone())
            .collect();
        let c = solve.rank as f64 + config.gcv_penalty * count_knots(&terms) as f64;
        gcv_score(solve.mse, n, c)
    };

    let mut surviving: Vec<usize> = (0..overfit.terms.len()).collect();
    let start = subset_fit(&surviving);
    let unpruned_gcv = subset_gcv(&surviving, &start);

    let mut trace = PruneTrace {
        unpruned_gcv,
        ..PruneTrace::default()
    };
    // (gcv, surviving set) per sequence entry; entry 0 is the unpruned model.
    let mut sequence: Vec<(f64, Vec<usize>)> = vec![(unpruned_gcv, surviving.clone())];

    let mut step = 0;
    while !surviving.is_empty() {
        let removal_mse = exec::map_indexed(surviving.len(), |pos| {
            let reduced: Vec<usize> = surviving
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pos)
                .map(|(_, &t)| t)
                .collect();
            subset_fit(&reduced).mse
        });
        // Lowest MSE wins; ties remove the lowest basis id.
        let mut best_pos = 0;
        for (pos, &mse) in removal_mse.iter().enumerate() {
            if mse.total_cmp(&removal_mse[best_pos]) == std::cmp::Ordering::Less {
                best_pos = pos;
            }
        }
        let removed_term = surviving.remove(best_pos);
        let solve = subset_fit(&surviving);
        let gcv = subset_gcv(&surviving, &solve);
        step += 1;
        trace.steps.push(PruneStep {
            step,
            removed: removed_term + 1,
            mse: solve.mse,
            gcv,
        });
        sequence.push((gcv, surviving.clone()));
    }

    // GCV-minimal entry; ties prefer the smaller model (later entry).
    let mut best_index = 0;
    for (i, (gcv, _)) in sequence.iter().enumerate() {
        if gcv.total_cmp(&sequence[best_index].0) != std::cmp::Ordering::Greater {
            best_index = i;
        }
    }
    trace.best_index = best_index;

    let chosen = &sequence[best_index].1;
    let solve = subset_fit(chosen);
    let terms: Vec<ModelTerm> = chosen
        .iter()
        .zip(&solve.coefficients[1..])
        .map(|(&t, &coefficient)| ModelTerm {
            coefficient,
            basis: overfit.terms[t].basis.clone(),
        })
        .collect();
    let model = MarsModel::new(
        solve.coefficients[0],
        terms,
        overfit.n_predictors,
        solve.mse,
        sequence[best_index].0,
    )?;
    Ok((model, trace))
}

/// Forward pass followed by backward pruning. Deterministic: identical
/// inputs and config give a bit-identical model.
pub fn fit(
    x: &Matrix,
    y: &[f64],
    config: &MarsFitConfig,
) -> Result<(MarsModel, ForwardTrace, PruneTrace)> {
    let (overfit, forward_trace) = forward_pass(x, y, config)?;
    let (model, prune_trace) = backward_prune(&overfit, x, y, config)?;
    Ok((model, forward_trace, prune_trace))
}

#[doc(hidden)]
pub mod bench_support {
    //! Hooks for the criterion benches: score one forward step's candidates
    //! with and without the parallel scan.

    use super::*;

    pub fn scan_first_step(x: &Matrix, y: &[f64], config: &MarsFitConfig, sequential: bool) -> f64 {
        let state = FitState::new(x, y, config).expect("valid inputs");
        let candidates = state.enumerate_candidates();
        let scores = state.score_candidates(&candidates, sequential);
        scores.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

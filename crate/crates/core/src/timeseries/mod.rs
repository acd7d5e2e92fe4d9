//! Monthly-series pipeline: standardization, lag embedding, chronological
//! splitting, and error metrics.
//!
//! Standardization statistics come from the training segment only, so the
//! test period never leaks into model fitting.

mod io;
mod synth;

pub use io::load_csv;
pub use synth::{seasonal_amplitude, seasonal_template, synth_monsoon};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// A monthly series in physical units, starting in January of `start_year`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub start_year: i32,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start_year: i32, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("series value".into()));
        }
        Ok(MonthlySeries { start_year, values })
    }

    pub fn months(&self) -> usize {
        self.values.len()
    }

    /// Complete years in the series.
    pub fn complete_years(&self) -> usize {
        self.values.len() / 12
    }

    /// Calendar month (1..=12) of the value at `index`.
    pub fn month_of(&self, index: usize) -> u8 {
        (index % 12) as u8 + 1
    }
}

/// Affine rescaling to zero mean and unit variance, fitted on the training
/// segment only (population standard deviation, denominator N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn transform(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Fits a [`Standardizer`] on `series.values[train_range]`.
pub fn fit_standardizer(series: &MonthlySeries, train_range: Range<usize>) -> Result<Standardizer> {
    if train_range.start >= train_range.end || train_range.end > series.values.len() {
        return Err(Error::Config(format!(
            "training range {}..{} is invalid for {} months",
            train_range.start,
            train_range.end,
            series.values.len()
        )));
    }
    let seg = &series.values[train_range];
    let n = seg.len() as f64;
    let mean = seg.iter().sum::<f64>() / n;
    let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= 0.0 {
        return Err(Error::Data(
            "training segment is constant; cannot standardize".into(),
        ));
    }
    Ok(Standardizer { mean, std })
}

/// Standardizes every value of a series.
pub fn standardize(values: &[f64], standardizer: &Standardizer) -> Vec<f64> {
    values.iter().map(|&v| standardizer.transform(v)).collect()
}

/// Maps standardized values back to physical units.
pub fn inverse_standardize(values: &[f64], standardizer: &Standardizer) -> Vec<f64> {
    values.iter().map(|&z| standardizer.inverse(z)).collect()
}

/// Chronological train/test row ranges of a [`LagDataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChronoSplit {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Supervised pairs built from a standardized series by lag embedding.
///
/// Row `i` of `inputs` holds the `n_lags` values immediately preceding
/// target `i`; `targets[i]` is the next value. `month_index[i]` is the
/// calendar month (1..=12) of the target, and `target_pos[i]` its position
/// in the source series.
#[derive(Clone, Debug, PartialEq)]
pub struct LagDataset {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    pub month_index: Vec<u8>,
    pub target_pos: Vec<usize>,
    pub n_lags: usize,
    pub split: Option<ChronoSplit>,
}

/// Builds supervised pairs: `n_lags` consecutive values predict the next
/// one. The slice is assumed to start in January.
pub fn lag_embed(values: &[f64], n_lags: usize) -> Result<LagDataset> {
    if n_lags == 0 {
        return Err(Error::Config("n_lags must be >= 1".into()));
    }
    if values.len() <= n_lags {
        return Err(Error::Data(format!(
            "{} values are too few for lag embedding with {} lags",
            values.len(),
            n_lags
        )));
    }
    let n = values.len() - n_lags;
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut month_index = Vec::with_capacity(n);
    let mut target_pos = Vec::with_capacity(n);
    for i in 0..n {
        rows.push(values[i..i + n_lags].to_vec());
        targets.push(values[i + n_lags]);
        month_index.push(((i + n_lags) % 12) as u8 + 1);
        target_pos.push(i + n_lags);
    }
    Ok(LagDataset {
        inputs: Matrix::from_rows(&rows)?,
        targets,
        month_index,
        target_pos,
        n_lags,
        split: None,
    })
}

/// Splits rows chronologically: a row belongs to training when its target
/// month falls within the first `train_years` years, otherwise to test.
pub fn chrono_split(dataset: &LagDataset, train_years: usize) -> Result<ChronoSplit> {
    if train_years == 0 {
        return Err(Error::Config("train_years must be >= 1".into()));
    }
    let boundary_month = train_years * 12;
    let n = dataset.targets.len();
    let total_months = dataset.target_pos.last().map_or(0, |&p| p + 1);
    if boundary_month >= total_months {
        return Err(Error::Config(format!(
            "train_years {} covers all {} available months",
            train_years, total_months
        )));
    }
    // Row targets start at n_lags, so the boundary row index is offset.
    let split_row = boundary_month.saturating_sub(dataset.n_lags).min(n);
    Ok(ChronoSplit {
        train: 0..split_row,
        test: split_row..n,
    })
}

/// Root mean squared error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Data("rmse of empty vectors".into()));
    }
    let ss = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>();
    Ok((ss / predicted.len() as f64).sqrt())
}

//! End-to-end benchmark execution.
//!
//! Pipeline: ingest or synthesize a monthly series, standardize on the
//! training segment, lag-embed, split chronologically, fit the spline sweep
//! and the network on training rows only, evaluate both on the test rows,
//! and write the report files.
//!
//! The spline sweep shares one forward pass: a forward run with a larger
//! basis budget extends the smaller run's addition sequence step for step,
//! so each sweep entry prunes a prefix of the full run instead of refitting
//! from scratch. Within the sweep, the winner is the entry with the lowest
//! training-data GCV; test RMSE is reported for every entry but never used
//! for selection.

use std::path::Path;
use std::time::Instant;

use crate::bench::config::{BenchConfig, DataSource, TrainerKind};
use crate::bench::emit::{write_report_files, PredictionRow};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::Matrix;
use crate::mars::{backward_prune, forward_pass, MarsFitConfig, MarsModel};
use crate::neural::{cg_train, gd_train, scg_train, BetaVariant, GdConfig, MlpNetwork, TrainReport};
use crate::timeseries::{
    chrono_split, fit_standardizer, lag_embed, load_csv, rmse, standardize, synth_monsoon,
    MonthlySeries,
};
use serde::Serialize;

/// One model's scoreline.
#[derive(Clone, Debug, Serialize)]
pub struct ModelResult {
    pub name: String,
    /// RMSE in standardized units on the training rows.
    pub train_rmse: f64,
    /// RMSE in standardized units on the test rows.
    pub test_rmse: f64,
    /// Training iterations; splines have none.
    pub iterations: Option<usize>,
    /// Wall-clock fit time. Reported on the console, never written to the
    /// output files, so repeated runs stay byte-identical.
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// One sweep entry.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub max_basis: usize,
    pub test_rmse: f64,
}

/// Spline-side selection summary.
#[derive(Clone, Debug, Serialize)]
pub struct MarsSummary {
    /// Sweep entry chosen by training-data GCV.
    pub selected_max_basis: usize,
    pub terms: usize,
    pub knots: usize,
    pub train_gcv: f64,
}

/// Everything a benchmark run produced. Serializes to `report.json`
/// (timing and in-memory models excluded).
#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub models: Vec<ModelResult>,
    pub mars: MarsSummary,
    pub sweep: Vec<SweepPoint>,
    /// Names of the files written to the output directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub ann_curve: Vec<f64>,
    #[serde(skip)]
    pub predictions: Vec<PredictionRow>,
    #[serde(skip)]
    pub mars_model: Option<MarsModel>,
    #[serde(skip)]
    pub ann_model: Option<MlpNetwork>,
}

fn rows_range(m: &Matrix, range: std::ops::Range<usize>) -> Matrix {
    let rows: Vec<Vec<f64>> = range.map(|i| m.row(i).to_vec()).collect();
    Matrix::from_rows(&rows).expect("non-empty row range")
}

fn column_matrix(values: &[f64]) -> Matrix {
    Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
        .expect("non-empty column")
}

struct MarsOutcome {
    result: ModelResult,
    summary: MarsSummary,
    sweep: Vec<SweepPoint>,
    model: MarsModel,
    test_pred: Vec<f64>,
}

struct AnnOutcome {
    result: ModelResult,
    curve: Vec<f64>,
    net: MlpNetwork,
    test_pred: Vec<f64>,
}

/// Runs the full benchmark and writes `report.txt`, `report.json`,
/// `train_curve.csv`, `sweep.csv` and `predictions.csv` to the configured
/// output directory.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let series = load_series(config)?;
    let train_months = config.train_years * 12;
    if train_months >= series.months() {
        return Err(Error::Config(format!(
            "train_years {} consumes all {} months of the series; nothing left to test",
            config.train_years,
            series.months(),
        )));
    }

    let standardizer = fit_standardizer(&series, 0..train_months)?;
    let z = standardize(&series.values, &standardizer);
    let mut dataset = lag_embed(&z, config.n_lags)?;
    let split = chrono_split(&dataset, config.train_years)?;
    dataset.split = Some(split.clone());
    if split.train.is_empty() {
        return Err(Error::Config(format!(
            "train_years {} with {} lags leaves no training rows",
            config.train_years, config.n_lags
        )));
    }
    if split.test.is_empty() {
        return Err(Error::Config("no test rows after the training period".into()));
    }

    let x_train = rows_range(&dataset.inputs, split.train.clone());
    let y_train: Vec<f64> = dataset.targets[split.train.clone()].to_vec();
    let x_test = rows_range(&dataset.inputs, split.test.clone());
    let y_test: Vec<f64> = dataset.targets[split.test.clone()].to_vec();

    let (mars_out, ann_out) = exec::join(
        || fit_mars_sweep(config, &x_train, &y_train, &x_test, &y_test),
        || fit_ann(config, &x_train, &y_train, &x_test, &y_test),
    );
    let mars = mars_out?;
    let ann = ann_out?;

    let predictions: Vec<PredictionRow> = split
        .test
        .clone()
        .enumerate()
        .map(|(k, row)| {
            let pos = dataset.target_pos[row];
            PredictionRow {
                month_index: pos,
                actual: series.values[pos],
                mars_pred: standardizer.inverse(mars.test_pred[k]),
                ann_pred: standardizer.inverse(ann.test_pred[k]),
            }
        })
        .collect();

    let mut report = BenchReport {
        models: vec![mars.result, ann.result],
        mars: mars.summary,
        sweep: mars.sweep,
        files: Vec::new(),
        ann_curve: ann.curve,
        predictions,
        mars_model: Some(mars.model),
        ann_model: Some(ann.net),
    };
    report.files = write_report_files(&report, &config.out_dir)?;
    Ok(report)
}

fn load_series(config: &BenchConfig) -> Result<MonthlySeries> {
    match &config.source {
        DataSource::Csv(path) => load_csv(path),
        DataSource::Synth { years, seed, sigma } => synth_monsoon(*years, *seed, *sigma),
    }
}

fn fit_mars_sweep(
    config: &BenchConfig,
    x_train: &Matrix,
    y_train: &[f64],
    x_test: &Matrix,
    y_test: &[f64],
) -> Result<MarsOutcome> {
    let started = Instant::now();
    let fit_config = MarsFitConfig {
        max_basis_functions: *config.max_basis_sweep.last().unwrap(),
        min_span: config.min_span,
        max_interaction_degree: config.degree,
        gcv_penalty: config.resolved_gcv_penalty(),
    };
    let (overfit, trace) = forward_pass(x_train, y_train, &fit_config)?;

    let mut sweep = Vec::new();
    let mut best: Option<(f64, usize, MarsModel, Vec<f64>)> = None;
    for &limit in &config.max_basis_sweep {
        // The forward run with budget `limit` is exactly the first
        // `limit / 2` pair additions of the full run.
        let pairs = trace.steps.len().min(limit / 2);
        let prefix = MarsModel::new(
            0.0,
            overfit.terms[..2 * pairs].to_vec(),
            overfit.n_predictors,
            0.0,
            0.0,
        )?;
        let (pruned, _) = backward_prune(&prefix, x_train, y_train, &fit_config)?;
        let test_pred = pruned.predict_batch(x_test)?;
        let test_rmse = rmse(&test_pred, y_test)?;
        sweep.push(SweepPoint {
            max_basis: limit,
            test_rmse,
        });
        let gcv = pruned.diagnostics.fit_gcv;
        let better = match &best {
            None => true,
            Some((best_gcv, _, _, _)) => gcv < *best_gcv,
        };
        if better {
            best = Some((gcv, limit, pruned, test_pred));
        }
    }
    let (train_gcv, selected_max_basis, model, test_pred) = best.expect("non-empty sweep");

    let train_pred = model.predict_batch(x_train)?;
    let result = ModelResult {
        name: "MARS".to_string(),
        train_rmse: rmse(&train_pred, y_train)?,
        test_rmse: rmse(&test_pred, y_test)?,
        iterations: None,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let summary = MarsSummary {
        selected_max_basis,
        terms: model.terms.len(),
        knots: model.knot_count(),
        train_gcv,
    };
    Ok(MarsOutcome {
        result,
        summary,
        sweep,
        model,
        test_pred,
    })
}

fn fit_ann(
    config: &BenchConfig,
    x_train: &Matrix,
    y_train: &[f64],
    x_test: &Matrix,
    y_test: &[f64],
) -> Result<AnnOutcome> {
    let started = Instant::now();
    let mut layer_sizes = vec![config.n_lags];
    layer_sizes.extend_from_slice(&config.hidden);
    layer_sizes.push(1);
    let mut net = MlpNetwork::init(&layer_sizes, config.seed)?;
    let y_train_m = column_matrix(y_train);

    let name = config.trainer.model_name();
    let report: TrainReport = match config.trainer {
        TrainerKind::Scg => scg_train(&mut net, x_train, &y_train_m, config.epochs),
        TrainerKind::Cg => cg_train(
            &mut net,
            x_train,
            &y_train_m,
            config.epochs,
            BetaVariant::FletcherReeves,
        ),
        TrainerKind::Gd => gd_train(
            &mut net,
            x_train,
            &y_train_m,
            &GdConfig {
                learning_rate: config.learning_rate,
                momentum: config.momentum,
                epochs: config.epochs,
            },
        ),
    }
    .map_err(|e| match e {
        Error::Diverged { epoch } => {
            Error::Numerical(format!("{name} training diverged at epoch {epoch}"))
        }
        other => other,
    })?;

    let flatten = |m: Matrix| -> Vec<f64> { m.data().to_vec() };
    let train_pred = flatten(net.predict_batch(x_train)?);
    let test_pred = flatten(net.predict_batch(x_test)?);
    let result = ModelResult {
        name: name.to_string(),
        train_rmse: rmse(&train_pred, y_train)?,
        test_rmse: rmse(&test_pred, y_test)?,
        iterations: Some(report.epochs),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(AnnOutcome {
        result,
        curve: report.mse_curve,
        net,
        test_pred,
    })
}

/// Per-month mean of the training targets: the minimal forecasting baseline.
/// Exposed so harnesses can compare models against it.
pub fn climatology_baseline(
    month_index: &[u8],
    targets: &[f64],
    train: std::ops::Range<usize>,
    eval: std::ops::Range<usize>,
) -> Result<f64> {
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Data("empty range for the climatology baseline".into()));
    }
    let mut sums = [0.0_f64; 12];
    let mut counts = [0usize; 12];
    for i in train {
        let m = month_index[i] as usize - 1;
        sums[m] += targets[i];
        counts[m] += 1;
    }
    let means: Vec<f64> = (0..12)
        .map(|m| {
            if counts[m] == 0 {
                0.0
            } else {
                sums[m] / counts[m] as f64
            }
        })
        .collect();
    let preds: Vec<f64> = eval
        .clone()
        .map(|i| means[month_index[i] as usize - 1])
        .collect();
    let actual: Vec<f64> = eval.map(|i| targets[i]).collect();
    rmse(&preds, &actual)
}

/// Reads a file written by [`run_benchmark`] back as bytes, for determinism
/// checks and golden comparisons.
pub fn read_output(out_dir: &Path, name: &str) -> Result<Vec<u8>> {
    Ok(std::fs::read(out_dir.join(name))?)
}

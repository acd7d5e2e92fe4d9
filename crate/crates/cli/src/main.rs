//! `rainbench`: forecasts a monthly series one month ahead with an adaptive
//! regression spline and a small neural network, then reports train/test
//! RMSE side by side plus plot-ready CSVs.

use clap::error::ErrorKind;
use clap::Parser;
use rainbench_core::bench::{
    emit_table, parse_synth, read_config_file, run_benchmark, BenchConfig, DataSource,
    TrainerKind,
};
use rainbench_core::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Benchmark spline and neural one-month-ahead forecasters on a monthly series.
#[derive(Debug, Parser)]
#[command(name = "rainbench", version, about, max_term_width = 100)]
struct Cli {
    /// Flat key=value configuration file, applied before flag overrides.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Input CSV (long `year,month,value` or wide `year,jan,...,dec`).
    #[arg(long, value_name = "CSV", conflicts_with = "synth")]
    data: Option<PathBuf>,

    /// Generate a synthetic monsoon-like series instead: YEARS:SEED:SIGMA.
    #[arg(long, value_name = "YEARS:SEED:SIGMA")]
    synth: Option<String>,

    /// Years used for training; the rest of the series is the test period.
    #[arg(long, value_name = "N")]
    train_years: Option<usize>,

    /// Number of lagged months fed to both models.
    #[arg(long, value_name = "N")]
    lags: Option<usize>,

    /// Comma-separated forward-stage basis limits, e.g. 5,10,15.
    #[arg(long, value_name = "LIST")]
    max_basis_sweep: Option<String>,

    /// Minimum observations between candidate knots.
    #[arg(long, value_name = "N")]
    min_span: Option<usize>,

    /// Maximum spline interaction degree (1 = additive).
    #[arg(long, value_name = "N")]
    degree: Option<usize>,

    /// Training epochs for the network.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,

    /// Network trainer: gd, cg or scg.
    #[arg(long, value_name = "NAME")]
    trainer: Option<String>,

    /// Network initialization seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output directory for report.txt, report.json and the CSVs.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<BenchConfig, Error> {
    // Placeholder source; a real one must come from flags or the file.
    let mut config = BenchConfig::new(DataSource::Synth {
        years: 0,
        seed: 0,
        sigma: 0.0,
    });
    let mut have_source = false;

    if let Some(path) = &cli.config {
        for (key, value) in read_config_file(path)? {
            if key == "data" || key == "synth" {
                have_source = true;
            }
            config.apply_setting(&key, &value)?;
        }
    }
    if let Some(path) = &cli.data {
        config.source = DataSource::Csv(path.clone());
        have_source = true;
    }
    if let Some(spec) = &cli.synth {
        config.source = parse_synth(spec)?;
        have_source = true;
    }
    if !have_source {
        return Err(Error::Config(
            "no data source: pass --data FILE or --synth YEARS:SEED:SIGMA".into(),
        ));
    }
    if let Some(v) = cli.train_years {
        config.train_years = v;
    }
    if let Some(v) = cli.lags {
        config.n_lags = v;
    }
    if let Some(list) = &cli.max_basis_sweep {
        config.apply_setting("max_basis_sweep", list)?;
    }
    if let Some(v) = cli.min_span {
        config.min_span = v;
    }
    if let Some(v) = cli.degree {
        config.degree = v;
    }
    if let Some(v) = cli.epochs {
        config.epochs = v;
    }
    if let Some(name) = &cli.trainer {
        config.trainer = TrainerKind::parse(name)?;
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(dir) = &cli.out {
        config.out_dir = dir.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let config = match build_config(&cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("rainbench: {e}");
            return ExitCode::from(e.exit_code());
        }
    };

    match run_benchmark(&config) {
        Ok(report) => {
            print!("{}", emit_table(&report));
            println!(
                "\nSpline basis limit selected by training GCV: {} ({} terms, {} knots)",
                report.mars.selected_max_basis, report.mars.terms, report.mars.knots
            );
            println!("Outputs written to {}:", config.out_dir.display());
            for f in &report.files {
                println!("  {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rainbench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

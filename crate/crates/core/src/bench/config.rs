//! Benchmark configuration: defaults, key=value config files, and overrides.

use crate::error::{Error, Result};
use std::path::PathBuf;

/// Where the monthly series comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synth { years: usize, seed: u64, sigma: f64 },
}

/// Which trainer fits the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainerKind {
    Gd,
    Cg,
    Scg,
}

impl TrainerKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "gd" => Ok(TrainerKind::Gd),
            "cg" => Ok(TrainerKind::Cg),
            "scg" => Ok(TrainerKind::Scg),
            other => Err(Error::Config(format!(
                "unknown trainer {other:?}; expected gd, cg or scg"
            ))),
        }
    }

    /// Model label used in reports.
    pub fn model_name(self) -> &'static str {
        match self {
            TrainerKind::Gd => "ANN-GD",
            TrainerKind::Cg => "ANN-CG",
            TrainerKind::Scg => "ANN-SCG",
        }
    }
}

/// Full configuration of one benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub source: DataSource,
    pub train_years: usize,
    pub n_lags: usize,
    /// Forward-stage basis limits to sweep, ascending.
    pub max_basis_sweep: Vec<usize>,
    pub min_span: usize,
    pub degree: usize,
    /// GCV cost per knot; `None` picks 2 for additive models, 3 otherwise.
    pub gcv_penalty: Option<f64>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub trainer: TrainerKind,
    /// Network initialization seed.
    pub seed: u64,
    /// Gradient-descent hyperparameters (used when `trainer` is `gd`).
    pub learning_rate: f64,
    pub momentum: f64,
    pub out_dir: PathBuf,
}

impl BenchConfig {
    /// Defaults: 40 training years, 12 lags, basis sweep 5,10,..,50 with
    /// min-span 1, an additive spline, a [12, 12] hidden network trained by
    /// scaled conjugate gradient for 600 epochs.
    pub fn new(source: DataSource) -> Self {
        BenchConfig {
            source,
            train_years: 40,
            n_lags: 12,
            max_basis_sweep: (1..=10).map(|k| 5 * k).collect(),
            min_span: 1,
            degree: 1,
            gcv_penalty: None,
            hidden: vec![12, 12],
            epochs: 600,
            trainer: TrainerKind::Scg,
            seed: 0,
            learning_rate: 0.01,
            momentum: 0.9,
            out_dir: PathBuf::from("bench_out"),
        }
    }

    pub fn resolved_gcv_penalty(&self) -> f64 {
        self.gcv_penalty
            .unwrap_or(if self.degree > 1 { 3.0 } else { 2.0 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_years == 0 {
            return Err(Error::Config("train_years must be >= 1".into()));
        }
        if self.n_lags == 0 {
            return Err(Error::Config("lags must be >= 1".into()));
        }
        if self.max_basis_sweep.is_empty() {
            return Err(Error::Config("max_basis_sweep must be non-empty".into()));
        }
        if self.max_basis_sweep.iter().any(|&m| m == 0) {
            return Err(Error::Config("max_basis_sweep entries must be positive".into()));
        }
        if !self.max_basis_sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("max_basis_sweep must be strictly ascending".into()));
        }
        if self.min_span == 0 {
            return Err(Error::Config("min_span must be >= 1".into()));
        }
        if self.degree == 0 {
            return Err(Error::Config("degree must be >= 1".into()));
        }
        if let Some(p) = self.gcv_penalty {
            if !(p >= 0.0) {
                return Err(Error::Config("gcv_penalty must be >= 0".into()));
            }
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        if let DataSource::Synth { years, sigma, .. } = self.source {
            if years < 2 {
                return Err(Error::Config("synth years must be >= 2".into()));
            }
            if !(sigma >= 0.0) {
                return Err(Error::Config("synth sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Applies one `key=value` setting; keys mirror the CLI flags.
    pub fn apply_setting(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} value {value:?}"));
        match key {
            "data" => self.source = DataSource::Csv(PathBuf::from(value)),
            "synth" => self.source = parse_synth(value)?,
            "train_years" => self.train_years = value.parse().map_err(|_| bad(key))?,
            "lags" => self.n_lags = value.parse().map_err(|_| bad(key))?,
            "max_basis_sweep" => {
                self.max_basis_sweep = value
                    .split(',')
                    .map(|p| p.trim().parse::<usize>().map_err(|_| bad(key)))
                    .collect::<Result<Vec<_>>>()?;
            }
            "min_span" => self.min_span = value.parse().map_err(|_| bad(key))?,
            "degree" => self.degree = value.parse().map_err(|_| bad(key))?,
            "gcv_penalty" => self.gcv_penalty = Some(value.parse().map_err(|_| bad(key))?),
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(|p| p.trim().parse::<usize>().map_err(|_| bad(key)))
                    .collect::<Result<Vec<_>>>()?;
            }
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key))?,
            "trainer" => self.trainer = TrainerKind::parse(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "learning_rate" => self.learning_rate = value.parse().map_err(|_| bad(key))?,
            "momentum" => self.momentum = value.parse().map_err(|_| bad(key))?,
            "out" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(Error::Config(format!("unknown configuration key {other:?}")))
            }
        }
        Ok(())
    }
}

/// Parses `YEARS:SEED:SIGMA`.
pub fn parse_synth(text: &str) -> Result<DataSource> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "synth spec {text:?} must be YEARS:SEED:SIGMA"
        )));
    }
    let years = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("synth years {:?} is not an integer", parts[0])))?;
    let seed = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("synth seed {:?} is not an integer", parts[1])))?;
    let sigma = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("synth sigma {:?} is not a number", parts[2])))?;
    Ok(DataSource::Synth { years, seed, sigma })
}

/// Reads a flat `key=value` config file; `#` starts a comment.
pub fn read_config_file(path: &std::path::Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value, found {line:?}",
                path.display(),
                i + 1
            ))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_documented_setup() {
        let c = BenchConfig::new(DataSource::Synth {
            years: 87,
            seed: 7,
            sigma: 0.3,
        });
        assert_eq!(c.train_years, 40);
        assert_eq!(c.n_lags, 12);
        assert_eq!(c.max_basis_sweep, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(c.min_span, 1);
        assert_eq!(c.hidden, vec![12, 12]);
        assert_eq!(c.epochs, 600);
        assert_eq!(c.trainer, TrainerKind::Scg);
        assert_eq!(c.resolved_gcv_penalty(), 2.0);
        c.validate().unwrap();
    }

    #[test]
    fn settings_override_defaults() {
        let mut c = BenchConfig::new(DataSource::Synth {
            years: 10,
            seed: 1,
            sigma: 0.1,
        });
        c.apply_setting("train_years", "5").unwrap();
        c.apply_setting("max_basis_sweep", "5, 10, 15").unwrap();
        c.apply_setting("trainer", "cg").unwrap();
        c.apply_setting("hidden", "8,4").unwrap();
        c.apply_setting("synth", "20:3:0.5").unwrap();
        assert_eq!(c.train_years, 5);
        assert_eq!(c.max_basis_sweep, vec![5, 10, 15]);
        assert_eq!(c.trainer, TrainerKind::Cg);
        assert_eq!(c.hidden, vec![8, 4]);
        assert_eq!(
            c.source,
            DataSource::Synth {
                years: 20,
                seed: 3,
                sigma: 0.5
            }
        );
        assert!(c.apply_setting("nonsense", "1").is_err());
        assert!(c.apply_setting("epochs", "abc").is_err());
    }

    #[test]
    fn validation_rejects_bad_sweeps() {
        let mut c = BenchConfig::new(DataSource::Synth {
            years: 10,
            seed: 1,
            sigma: 0.1,
        });
        c.max_basis_sweep = vec![];
        assert!(c.validate().is_err());
        c.max_basis_sweep = vec![10, 5];
        assert!(c.validate().is_err());
        c.max_basis_sweep = vec![5, 5];
        assert!(c.validate().is_err());
        c.max_basis_sweep = vec![5, 10];
        c.validate().unwrap();
    }

    #[test]
    fn config_file_lines_parse_with_comments() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# benchmark setup").unwrap();
        writeln!(f, "train_years = 30").unwrap();
        writeln!(f, "trainer=scg  # default anyway").unwrap();
        writeln!(f).unwrap();
        f.flush().unwrap();
        let pairs = read_config_file(f.path()).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("train_years".to_string(), "30".to_string()),
                ("trainer".to_string(), "scg".to_string()),
            ]
        );
    }

    #[test]
    fn synth_spec_parses_or_complains() {
        assert_eq!(
            parse_synth("87:7:0.3").unwrap(),
            DataSource::Synth {
                years: 87,
                seed: 7,
                sigma: 0.3
            }
        );
        assert!(parse_synth("87:7").is_err());
        assert!(parse_synth("a:b:c").is_err());
    }
}

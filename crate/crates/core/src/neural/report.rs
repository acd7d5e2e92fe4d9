//! Training outcome reporting.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Why a trainer stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Ran the configured number of epochs.
    EpochLimit,
    /// Gradient norm fell below the floor.
    GradientFloor,
    /// Training loss fell below the floor.
    MseFloor,
    /// No further numerical progress was possible (dead line search or
    /// trust-region scale at its ceiling).
    Stalled,
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training MSE after each completed epoch; length equals `epochs`.
    pub mse_curve: Vec<f64>,
    /// Epochs actually run.
    pub epochs: usize,
    pub termination: Termination,
    /// Gradient evaluations performed by the trainer.
    pub grad_evals: usize,
    /// Loss-only evaluations performed by the trainer.
    pub loss_evals: usize,
}

impl TrainReport {
    pub fn final_mse(&self) -> Option<f64> {
        self.mse_curve.last().copied()
    }

    /// Writes the `epoch,mse` curve.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,mse")?;
        for (i, mse) in self.mse_curve.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, mse)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_plus_one_row_per_epoch() {
        let report = TrainReport {
            mse_curve: vec![0.5, 0.25, 0.125],
            epochs: 3,
            termination: Termination::EpochLimit,
            grad_evals: 3,
            loss_evals: 3,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "epoch,mse\n1,0.5\n2,0.25\n3,0.125\n");
    }
}

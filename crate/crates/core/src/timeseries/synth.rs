//! Synthetic monsoon-like monthly series.
//!
//! A fixed seasonal template with a sharp wet season is modulated by a slow
//! multi-year amplitude cycle and by a persistent relative anomaly: monthly
//! departures are proportional to the monthly mean (rainfall variability
//! scales with the amount) and follow an AR(1) process (active and break
//! spells persist across neighboring months). Both give lag-based
//! forecasters real signal that a per-month climatology cannot use, which
//! is the point of benchmarking against one.

use crate::error::{Error, Result};
use crate::timeseries::MonthlySeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::TAU;

/// Monthly means in millimetres, January..December.
const TEMPLATE_MM: [f64; 12] = [
    15.0, 20.0, 35.0, 110.0, 230.0, 680.0, 720.0, 430.0, 250.0, 280.0, 140.0, 45.0,
];

/// Period of the interannual amplitude cycle, in months.
const AMPLITUDE_PERIOD: f64 = 96.0;
/// Relative swing of the amplitude cycle.
const AMPLITUDE_SWING: f64 = 0.4;
const AMPLITUDE_PHASE: f64 = 0.7;

/// Month-to-month persistence of the relative anomaly.
const ANOMALY_PERSISTENCE: f64 = 0.8;

const SYNTH_START_YEAR: i32 = 1900;

/// The fixed seasonal template, January..December, in millimetres.
pub fn seasonal_template() -> [f64; 12] {
    TEMPLATE_MM
}

/// Slow multiplicative modulation applied at month index `t`.
pub fn seasonal_amplitude(t: usize) -> f64 {
    1.0 + AMPLITUDE_SWING * (TAU * t as f64 / AMPLITUDE_PERIOD + AMPLITUDE_PHASE).sin()
}

/// Generates `years` of monsoon-like monthly data.
///
/// `noise_sigma` is the stationary standard deviation of the relative
/// anomaly: each month's value is `template * amplitude * (1 + a_t)` with
/// `a_t = 0.8 a_{t-1} + noise_sigma * sqrt(1 - 0.64) * eps_t`, clamped at
/// zero. The same arguments always produce an identical series.
pub fn synth_monsoon(years: usize, seed: u64, noise_sigma: f64) -> Result<MonthlySeries> {
    if years < 2 {
        return Err(Error::Config("synthetic series needs at least 2 years".into()));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation_scale =
        noise_sigma * (1.0 - ANOMALY_PERSISTENCE * ANOMALY_PERSISTENCE).sqrt();
    let mut anomaly = 0.0;
    let values = (0..years * 12)
        .map(|t| {
            if noise_sigma > 0.0 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                anomaly = if t == 0 {
                    noise_sigma * eps
                } else {
                    ANOMALY_PERSISTENCE * anomaly + innovation_scale * eps
                };
            }
            (TEMPLATE_MM[t % 12] * seasonal_amplitude(t) * (1.0 + anomaly)).max(0.0)
        })
        .collect();
    MonthlySeries::new(SYNTH_START_YEAR, values)
}

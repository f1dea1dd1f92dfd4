//! Seeded Monte-Carlo trial runner and threshold sweeps.
//!
//! A trial samples a database pair, runs the MAP estimator, and compares
//! against the hidden matching; success means exact recovery of the whole
//! permutation. Trials are independent tasks keyed by their index: the
//! per-trial seed is `mix_seed(master_seed, trial_index)`, so results do
//! not depend on worker count or execution order.

use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dist::{sample_pair, ProductForm};
use crate::error::{Error, Result};
use crate::matching::{build_weights, max_weight_matching};
use crate::rng::mix_seed;
use crate::spectral::cycle_mi;

/// 97.5% normal quantile used by the Wilson 95% interval.
const WILSON_Z: f64 = 1.959963984540054;

/// Wall-clock stopwatch; reads as zero on targets without a monotonic
/// clock (wasm32), where trial timing is not meaningful anyway.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Vary the number of i.i.d. coordinates per entry.
    Reps,
    /// Vary the database size.
    N,
    /// Vary the correlation of the binary symmetric family.
    Epsilon,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<SweepAxis> {
        match s {
            "reps" => Some(SweepAxis::Reps),
            "n" => Some(SweepAxis::N),
            "epsilon" => Some(SweepAxis::Epsilon),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Reps => "reps",
            SweepAxis::N => "n",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ProductForm,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl ExperimentConfig {
    /// Checks the axis values: integers >= 1 for reps and n, correlations
    /// in [0, 1] for epsilon.
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::NotADistribution {
                context: "trials must be >= 1".into(),
            });
        }
        if self.n < 1 {
            return Err(Error::NotADistribution {
                context: "n must be >= 1".into(),
            });
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::Reps | SweepAxis::N => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
                SweepAxis::Epsilon => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(Error::NotADistribution {
                    context: format!("value {v} is invalid for axis {}", self.axis.name()),
                });
            }
        }
        Ok(())
    }

    /// The configuration for one sweep point.
    fn at_value(&self, value: f64) -> Result<ExperimentConfig> {
        let mut point = self.clone();
        match self.axis {
            SweepAxis::Reps => point.model = self.model.with_reps(value as u32),
            SweepAxis::N => point.n = value as usize,
            SweepAxis::Epsilon => {
                point.model = self
                    .model
                    .with_base(crate::dist::JointDistribution::binary_symmetric(value)?)
            }
        }
        Ok(point)
    }
}

/// Outcome of a single trial.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialResult {
    pub success: bool,
    pub map_loglik: f64,
    pub true_loglik: f64,
    /// Users matched differently from the truth.
    pub hamming_errors: usize,
    pub wall_time: f64,
}

/// Runs one trial: sample at seed `mix_seed(master_seed, trial_index)`,
/// estimate, compare to the hidden matching.
pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialResult> {
    let watch = Stopwatch::start();
    let seed = mix_seed(config.master_seed, trial_index as u64);
    let (pair, truth) = sample_pair(&config.model, config.n, seed);
    let weights = build_weights(&pair, &config.model)?;
    let estimate = max_weight_matching(&weights)?;
    let map_loglik = weights.matching_weight(&estimate);
    let true_loglik = weights.matching_weight(&truth);
    let hamming_errors = config.n - estimate.overlap(&truth);
    Ok(TrialResult {
        success: hamming_errors == 0,
        map_loglik,
        true_loglik,
        hamming_errors,
        wall_time: watch.seconds(),
    })
}

/// One row of a sweep: recovery rate with a Wilson 95% interval, plus the
/// order-2 cycle MI and its ratio to the 2 ln n threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub cmi2_nats: f64,
    pub threshold_ratio: f64,
    pub recovery_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    assert!(trials >= 1);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = WILSON_Z;
    let denom = 1.0 + z * z / n;
    let center = p + z * z / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    (
        ((center - half) / denom).max(0.0),
        ((center + half) / denom).min(1.0),
    )
}

fn run_all_trials(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    #[cfg(feature = "parallel")]
    {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.trials).map(|t| run_trial(config, t)).collect()
    }
}

/// Aggregates all trials of `config` into a single row. The row's
/// axis_value echoes the config's current value for its axis.
pub fn recovery_rate(config: &ExperimentConfig) -> Result<SweepRow> {
    config.validate()?;
    let results = run_all_trials(config)?;
    let axis_value = match config.axis {
        SweepAxis::Reps => config.model.reps() as f64,
        SweepAxis::N => config.n as f64,
        SweepAxis::Epsilon => f64::NAN, // meaningful only inside sweep()
    };
    Ok(aggregate(config, axis_value, &results))
}

fn aggregate(config: &ExperimentConfig, axis_value: f64, results: &[TrialResult]) -> SweepRow {
    let successes = results.iter().filter(|r| r.success).count();
    let rate = successes as f64 / results.len() as f64;
    let (lo, hi) = wilson_interval(successes, results.len());
    let cmi2 = cycle_mi(&config.model, 2.0).expect("valid model");
    let threshold_ratio = cmi2 / (2.0 * (config.n as f64).ln());
    SweepRow {
        axis_value,
        cmi2_nats: cmi2,
        threshold_ratio,
        recovery_rate: rate,
        wilson_lo: lo,
        wilson_hi: hi,
    }
}

/// Runs the whole sweep; rows come back in axis order. Per-trial results
/// are returned alongside each row for verbose reporting.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<(SweepRow, Vec<TrialResult>)>> {
    config.validate()?;
    if config.values.is_empty() {
        return Err(Error::NotADistribution {
            context: "sweep requires at least one axis value".into(),
        });
    }
    let mut rows = Vec::with_capacity(config.values.len());
    for &value in &config.values {
        let point = config.at_value(value)?;
        let results = run_all_trials(&point)?;
        rows.push((aggregate(&point, value, &results), results));
    }
    Ok(rows)
}

/// CSV rendering with a pinned header; floats print in shortest
/// round-trip form with '.' decimals and LF endings.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,cmi2_nats,threshold_ratio,recovery_rate,wilson_lo,wilson_hi\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.axis_value, r.cmi2_nats, r.threshold_ratio, r.recovery_rate, r.wilson_lo, r.wilson_hi
        ));
    }
    out
}

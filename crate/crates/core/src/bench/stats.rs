use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::TrialResult;

/// Summary of one cell's trials. Whiskers are the minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub mean: f64,
    pub median: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean_seconds: f64,
    pub count: usize,
}

pub fn aggregate(trials: &[TrialResult]) -> Result<TrialStats> {
    let errors: Vec<f64> = trials.iter().map(|t| t.final_test_error).collect();
    let seconds: Vec<f64> = trials.iter().map(|t| t.total_seconds).collect();
    summarize(&errors, &seconds)
}

/// Statistics over raw values; `seconds` must be as long as `errors`.
pub fn summarize(errors: &[f64], seconds: &[f64]) -> Result<TrialStats> {
    if errors.is_empty() {
        return Err(Error::Aggregation("no trials to aggregate".into()));
    }
    if errors.len() != seconds.len() {
        return Err(Error::Aggregation(format!(
            "{} errors but {} timings",
            errors.len(),
            seconds.len()
        )));
    }
    if errors.iter().chain(seconds).any(|v| !v.is_finite()) {
        return Err(Error::Aggregation("non-finite trial value".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(TrialStats {
        mean: mean(errors),
        median,
        whisker_low: sorted[0],
        whisker_high: sorted[n - 1],
        mean_seconds: mean(seconds),
        count: n,
    })
}

/// Sums in index order so results never depend on scheduling.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

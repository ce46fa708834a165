//! Scoring a run: best evaluation in the final tenth, then mean and spread
//! across seeds.

use crate::error::{Error, Result};

/// Fraction of the run, at the end, whose evaluations count.
pub const FINAL_WINDOW: f64 = 0.1;

/// Max of the returns whose iteration lies strictly after
/// `(1 − FINAL_WINDOW)·total_iters`.
pub fn final_metric(series: &[(u64, f64)], total_iters: u64) -> Result<f64> {
    let cutoff = (1.0 - FINAL_WINDOW) * total_iters as f64;
    series
        .iter()
        .filter(|(it, _)| *it as f64 > cutoff)
        .map(|&(_, r)| r)
        .fold(None, |best: Option<f64>, r| Some(best.map_or(r, |b| b.max(r))))
        .ok_or_else(|| Error::contract(format!("no evaluation after iteration {cutoff} of {total_iters}")))
}

/// Mean and population standard deviation.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::contract("aggregate over zero seeds"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// One `(iteration, mean return)` series per seed.
    pub evaluations: Vec<Vec<(u64, f64)>>,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_series(evaluations: Vec<Vec<(u64, f64)>>, total_iters: u64) -> Result<Self> {
        let per_seed = evaluations
            .iter()
            .map(|s| final_metric(s, total_iters))
            .collect::<Result<Vec<_>>>()?;
        let (mean, std) = aggregate(&per_seed)?;
        Ok(Self {
            evaluations,
            per_seed,
            mean,
            std,
        })
    }
}

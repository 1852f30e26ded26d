use std::io::Write;

use serde::Serialize;

use super::{PrecoderOutcome, ScenarioConfig, TrialResult};
use crate::error::{Error, Result};
use crate::metrics::{guaranteed_sinr, quantile};
use crate::precoders::NoiseReference;

pub const RESULTS_HEADER: &str = "trial,user,precoder,sinr_db,nmse";

/// Number of quantile points kept per CDF in the summary.
const CDF_POINTS: usize = 101;

/// Pooled statistics of one precoder at one CSI quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub precoder: String,
    pub nmse_target: Option<f64>,
    pub mean_realized_nmse: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// Number of per-user SINR samples pooled over successful trials.
    pub samples: usize,
    pub mean_db: Option<f64>,
    pub median_db: Option<f64>,
    /// SINR reached by 90 % of users.
    pub guaranteed_90_db: Option<f64>,
    /// `(sinr_db, probability)` at evenly spaced probabilities.
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub noise_variance: f64,
    pub reference_power: f64,
    pub rows: Vec<SummaryRow>,
}

impl ScenarioSummary {
    pub fn row(&self, precoder: &str, nmse_target: Option<f64>) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.precoder == precoder && r.nmse_target == nmse_target)
    }
}

pub fn summarize(config: &ScenarioConfig, noise: &NoiseReference, trials: &[TrialResult]) -> Result<ScenarioSummary> {
    let n_points = config.nmse_grid.as_ref().map_or(1, Vec::len);
    let mut rows = Vec::with_capacity(n_points * config.precoders.len());
    for point in 0..n_points {
        let target = config.nmse_grid.as_ref().map(|g| g[point]);
        let realized: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.points[point].realized_nmse)
            .collect();
        let mean_realized_nmse = (!realized.is_empty()).then(|| realized.iter().sum::<f64>() / realized.len() as f64);
        for (p, entry) in config.precoders.iter().enumerate() {
            let mut samples = Vec::new();
            let mut failures = 0;
            for t in trials {
                match &t.points[point].outcomes[p] {
                    PrecoderOutcome::Sinr(s) => samples.extend_from_slice(s),
                    PrecoderOutcome::Failed(_) => failures += 1,
                }
            }
            samples.sort_by(f64::total_cmp);
            let (mean_db, median_db, guaranteed_90_db, cdf) = if samples.is_empty() {
                (None, None, None, Vec::new())
            } else {
                let cdf = (0..CDF_POINTS)
                    .map(|i| {
                        let q = i as f64 / (CDF_POINTS - 1) as f64;
                        quantile(&samples, q).map(|v| (v, q))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (
                    Some(samples.iter().sum::<f64>() / samples.len() as f64),
                    Some(quantile(&samples, 0.5)?),
                    Some(guaranteed_sinr(&samples, 0.9)?),
                    cdf,
                )
            };
            rows.push(SummaryRow {
                precoder: entry.label.clone(),
                nmse_target: target,
                mean_realized_nmse,
                trials: trials.len(),
                failures,
                failure_rate: failures as f64 / trials.len().max(1) as f64,
                samples: samples.len(),
                mean_db,
                median_db,
                guaranteed_90_db,
                cdf,
            });
        }
    }
    Ok(ScenarioSummary {
        noise_variance: noise.variance,
        reference_power: noise.reference_power,
        rows,
    })
}

/// Writes one row per trial, CSI quality, precoder and user. Failed
/// precoders get an empty `sinr_db`; `nmse` holds the target NMSE of the
/// sweep point and is empty without a sweep.
pub fn write_results_csv<W: Write>(config: &ScenarioConfig, trials: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Consistency(format!("writing results: {e}"));
    w.write_record(RESULTS_HEADER.split(',')).map_err(io)?;
    for t in trials {
        for point in &t.points {
            let nmse = point.nmse_target.map(|v| format!("{v:?}")).unwrap_or_default();
            for (entry, outcome) in config.precoders.iter().zip(&point.outcomes) {
                for user in 0..config.k_users {
                    let sinr = match outcome {
                        PrecoderOutcome::Sinr(s) => format!("{:?}", s[user]),
                        PrecoderOutcome::Failed(_) => String::new(),
                    };
                    w.write_record([t.trial.to_string(), user.to_string(), entry.label.clone(), sinr, nmse.clone()])
                        .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Consistency(format!("writing results: {e}")))?;
    Ok(())
}

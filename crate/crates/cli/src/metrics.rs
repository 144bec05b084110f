//! Utility metrics.

use ldp_longitudinal::LdpError;

use crate::error::Result;

/// Squared error averaged over values, then attributes, then rounds.
///
/// `estimates[t][j]` holds the estimates of attribute `j` in round `t`.
pub fn mse_avg(true_freqs: &[Vec<f64>], estimates: &[Vec<Vec<f64>>]) -> Result<f64> {
    if estimates.is_empty() || true_freqs.is_empty() {
        return Err(LdpError::ShapeMismatch("no rounds or no attributes".into()).into());
    }
    let mut total = 0.0;
    for round in estimates {
        if round.len() != true_freqs.len() {
            return Err(LdpError::DimensionMismatch {
                expected: true_freqs.len(),
                got: round.len(),
            }
            .into());
        }
        let mut per_round = 0.0;
        for (truth, est) in true_freqs.iter().zip(round) {
            if truth.len() != est.len() || truth.is_empty() {
                return Err(LdpError::ShapeMismatch(format!(
                    "{} estimates for {} values",
                    est.len(),
                    truth.len()
                ))
                .into());
            }
            let sse: f64 = truth.iter().zip(est).map(|(f, e)| (f - e).powi(2)).sum();
            per_round += sse / truth.len() as f64;
        }
        total += per_round / true_freqs.len() as f64;
    }
    Ok(total / estimates.len() as f64)
}

/// Relative improvement `(baseline - candidate) / baseline`.
pub fn accuracy_gain(mse_baseline: f64, mse_candidate: f64) -> Result<f64> {
    if mse_baseline.is_nan() || mse_baseline <= 0.0 {
        return Err(LdpError::ZeroBaseline.into());
    }
    Ok((mse_baseline - mse_candidate) / mse_baseline)
}

/// Clips negative estimates to zero and rescales to sum to one. An all-zero
/// vector becomes uniform.
pub fn clip_and_normalize(estimates: &mut [f64]) {
    for e in estimates.iter_mut() {
        *e = e.max(0.0);
    }
    let sum: f64 = estimates.iter().sum();
    if sum > 0.0 {
        estimates.iter_mut().for_each(|e| *e /= sum);
    } else if !estimates.is_empty() {
        let u = 1.0 / estimates.len() as f64;
        estimates.iter_mut().for_each(|e| *e = u);
    }
}

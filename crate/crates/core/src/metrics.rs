//! Accuracy and efficiency metrics.

use std::collections::BTreeMap;

use crate::barycenter::MomentSummary;
use crate::error::{Error, Result};
use crate::linalg;

/// 2-Wasserstein distance between the Gaussians with the given moments:
/// `sqrt(‖μ₁ − μ₂‖² + d_B(Σ₁, Σ₂)²)`.
pub fn approximation_error(full: &MomentSummary, approx: &MomentSummary) -> Result<f64> {
    Ok(linalg::gaussian_w2_sq(&full.mean, &full.cov, &approx.mean, &approx.cov)?.sqrt())
}

/// Errors on each coordinate block, from the marginal moments of the block.
pub fn per_block_errors(
    full: &MomentSummary,
    approx: &MomentSummary,
    blocks: &[(String, Vec<usize>)],
) -> Result<BTreeMap<String, f64>> {
    blocks
        .iter()
        .map(|(label, idx)| {
            if let Some(&bad) = idx.iter().find(|&&i| i >= full.dim() || i >= approx.dim()) {
                return Err(Error::DimensionMismatch(format!(
                    "block {label} refers to coordinate {bad}"
                )));
            }
            Ok((
                label.clone(),
                approximation_error(&full.restrict(idx), &approx.restrict(idx))?,
            ))
        })
        .collect()
}

/// `t_full / t_dnc`.
pub fn computational_gain(t_full: f64, t_dnc: f64) -> Result<f64> {
    if !(t_full > 0.0) || !(t_dnc > 0.0) || !t_full.is_finite() || !t_dnc.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wall clocks must be positive and finite, got {t_full} and {t_dnc}"
        )));
    }
    Ok(t_full / t_dnc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    /// Errors strictly decrease along increasing `n`.
    pub monotone_decreasing: bool,
    /// `(n, √n · error)` in increasing `n`.
    pub sqrt_n_scaled: Vec<(usize, f64)>,
}

pub fn scaling_diagnostic(errors_by_n: &[(usize, f64)]) -> Result<ScalingReport> {
    if errors_by_n.len() < 2 {
        return Err(Error::InvalidArgument(
            "scaling diagnostic needs at least two grid points".into(),
        ));
    }
    let mut pts = errors_by_n.to_vec();
    pts.sort_by_key(|&(n, _)| n);
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument(
            "grid points must have distinct n".into(),
        ));
    }
    Ok(ScalingReport {
        monotone_decreasing: pts.windows(2).all(|w| w[1].1 < w[0].1),
        sqrt_n_scaled: pts
            .iter()
            .map(|&(n, e)| (n, (n as f64).sqrt() * e))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalDiagnostics {
    pub barycenter_converged: bool,
    /// Smallest eigenvalue over all subset covariance estimates.
    pub min_subset_eigenvalue: f64,
}

/// Accuracy and cost of one combined posterior against the full-data fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub approximation_error: f64,
    /// Gain under the max-over-subsets wall-clock convention.
    pub computational_gain: f64,
    /// Gain when subsets are timed back to back.
    pub computational_gain_sum: f64,
    pub per_block_errors: Option<BTreeMap<String, f64>>,
    pub diagnostics: EvalDiagnostics,
}

/// Smallest eigenvalue across the subset covariances.
pub fn min_subset_eigenvalue(summaries: &[MomentSummary]) -> Result<f64> {
    summaries
        .iter()
        .map(|s| linalg::sym_eigen(&s.cov).map(|e| e.min_eigenvalue()))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

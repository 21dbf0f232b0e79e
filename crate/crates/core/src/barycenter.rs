//! Subset moment estimates, the location-scatter barycenter, and the two draw
//! combiners (WASP transform and DPMC recentering).

use nalgebra::{DMatrix, DVector};

use crate::draws::{DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, SymMatrix, DEFAULT_CLAMP_TOL};

/// Mean and covariance of a draw set, covariance normalized by `1/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
    pub n_draws: usize,
}

impl MomentSummary {
    pub fn new(mean: DVector<f64>, cov: SymMatrix, n_draws: usize) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        Ok(Self { mean, cov, n_draws })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal moments on a subset of coordinates.
    pub fn restrict(&self, idx: &[usize]) -> MomentSummary {
        MomentSummary {
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            cov: self.cov.restrict(idx),
            n_draws: self.n_draws,
        }
    }
}

pub fn moment_summary(draws: &DrawMatrix) -> Result<MomentSummary> {
    let t = draws.n_draws();
    if t < 2 {
        return Err(Error::InsufficientDraws { needed: 2, got: t });
    }
    let m = draws.matrix();
    let mean = m.row_mean().transpose();
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / t as f64;
    Ok(MomentSummary {
        mean,
        cov: SymMatrix::symmetrized(cov),
        n_draws: t,
    })
}

/// Moment summaries for many draw sets, computed data-parallel.
pub fn moment_summaries(draws: &[DrawMatrix]) -> Result<Vec<MomentSummary>> {
    exec::map_indexed(draws.len(), |j| moment_summary(&draws[j]))
        .into_iter()
        .collect()
}

pub fn barycenter_mean(means: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = means
        .first()
        .ok_or_else(|| Error::InvalidArgument("barycenter of an empty list".into()))?;
    let d = first.len();
    let mut acc = DVector::zeros(d);
    for (j, m) in means.iter().enumerate() {
        if m.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean {} has length {}, expected {d}",
                j + 1,
                m.len()
            )));
        }
        acc += m;
    }
    Ok(acc / means.len() as f64)
}

/// Stopping rule and clamping for the covariance fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Bound on `‖Σ̄_{t+1} − Σ̄_t‖_F / max(1, ‖Σ̄_t‖_F)`.
    pub tol: f64,
    pub max_iter: usize,
    pub clamp_tol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            clamp_tol: DEFAULT_CLAMP_TOL,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.clamp_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fixed point config needs tol > 0, max_iter >= 1, clamp_tol >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Covariance part of the barycenter together with its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct CovFixedPoint {
    pub cov: SymMatrix,
    pub iterations_used: usize,
    pub final_step_norm: f64,
    pub converged: bool,
}

/// Mean and covariance of the combined (WASP) posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
    pub iterations_used: usize,
    pub final_step_norm: f64,
    pub converged: bool,
}

fn check_same_dim(covs: &[SymMatrix]) -> Result<usize> {
    let first = covs
        .first()
        .ok_or_else(|| Error::InvalidArgument("barycenter of an empty list".into()))?;
    let d = first.dim();
    if let Some((j, c)) = covs.iter().enumerate().find(|(_, c)| c.dim() != d) {
        return Err(Error::DimensionMismatch(format!(
            "covariance {} is {}x{}, expected {d}x{d}",
            j + 1,
            c.dim(),
            c.dim()
        )));
    }
    Ok(d)
}

/// `(1/k) Σ_j (S^{1/2} Σ_j S^{1/2})^{1/2}` for a given square root of `S`.
fn mean_of_conjugated_roots(
    s_half: &SymMatrix,
    covs: &[SymMatrix],
    clamp_tol: f64,
) -> Result<SymMatrix> {
    let d = s_half.dim();
    let mut acc = DMatrix::zeros(d, d);
    for c in covs {
        let inner = c.congruence(s_half.as_matrix());
        acc += linalg::psd_sqrt(&inner, clamp_tol)?.as_matrix();
    }
    Ok(SymMatrix::symmetrized(acc / covs.len() as f64))
}

/// Equal-weight barycenter covariance of `covs` by fixed-point iteration from `Σ̄₀ = I`.
///
/// Each step computes `N_t = (1/k) Σ_j (Σ̄_t^{1/2} Σ_j Σ̄_t^{1/2})^{1/2}` and
/// sets `Σ̄_{t+1} = Σ̄_t^{-1/2} N_t² Σ̄_t^{-1/2}`. Running out of iterations is
/// not an error; the result carries `converged = false`.
pub fn barycenter_cov_fixed_point(
    covs: &[SymMatrix],
    config: &FixedPointConfig,
) -> Result<CovFixedPoint> {
    config.validate()?;
    let d = check_same_dim(covs)?;
    for c in covs {
        // fails below the clamp band
        linalg::psd_sqrt(c, config.clamp_tol)?;
    }

    let mut current = SymMatrix::identity(d);
    let mut step_norm = f64::INFINITY;
    for iter in 1..=config.max_iter {
        let (s_half, s_inv_half) = linalg::psd_sqrt_and_inv_sqrt(&current, config.clamp_tol)
            .map_err(|e| with_context(e, format!("barycenter iterate {}", iter - 1)))?;
        let n = mean_of_conjugated_roots(&s_half, covs, config.clamp_tol)?;
        let n_sq = n.as_matrix() * n.as_matrix();
        let next = SymMatrix::symmetrized(s_inv_half.as_matrix() * n_sq * s_inv_half.as_matrix());
        step_norm =
            (next.as_matrix() - current.as_matrix()).norm() / current.frobenius_norm().max(1.0);
        current = next;
        if step_norm <= config.tol {
            return Ok(CovFixedPoint {
                cov: current,
                iterations_used: iter,
                final_step_norm: step_norm,
                converged: true,
            });
        }
    }
    Ok(CovFixedPoint {
        cov: current,
        iterations_used: config.max_iter,
        final_step_norm: step_norm,
        converged: false,
    })
}

/// Barycenter mean and covariance of a list of subset summaries.
pub fn barycenter(
    summaries: &[MomentSummary],
    config: &FixedPointConfig,
) -> Result<BarycenterResult> {
    let means: Vec<_> = summaries.iter().map(|s| s.mean.clone()).collect();
    let covs: Vec<_> = summaries.iter().map(|s| s.cov.clone()).collect();
    let mean = barycenter_mean(&means)?;
    let fp = barycenter_cov_fixed_point(&covs, config)?;
    if fp.cov.dim() != mean.len() {
        return Err(Error::DimensionMismatch(
            "means and covariances disagree in dimension".into(),
        ));
    }
    Ok(BarycenterResult {
        mean,
        cov: fp.cov,
        iterations_used: fp.iterations_used,
        final_step_norm: fp.final_step_norm,
        converged: fp.converged,
    })
}

/// Frobenius norm of `Σ̄ − (1/k) Σ_j (Σ̄^{1/2} Σ_j Σ̄^{1/2})^{1/2}`.
pub fn barycenter_residual(bary_cov: &SymMatrix, covs: &[SymMatrix]) -> Result<f64> {
    let d = check_same_dim(covs)?;
    if d != bary_cov.dim() {
        return Err(Error::DimensionMismatch(format!(
            "barycenter is {}x{}, inputs are {d}x{d}",
            bary_cov.dim(),
            bary_cov.dim()
        )));
    }
    let root = linalg::psd_sqrt(bary_cov, DEFAULT_CLAMP_TOL)?;
    let n = mean_of_conjugated_roots(&root, covs, DEFAULT_CLAMP_TOL)?;
    Ok((bary_cov.as_matrix() - n.as_matrix()).norm())
}

fn with_context(e: Error, context: String) -> Error {
    match e {
        Error::Singular { min_eigenvalue, .. } => Error::Singular {
            min_eigenvalue,
            context: Some(context),
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CombineMethod {
    Wasp,
    Dpmc,
}

impl CombineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CombineMethod::Wasp => "wasp",
            CombineMethod::Dpmc => "dpmc",
        }
    }
}

impl std::str::FromStr for CombineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wasp" | "proposed" => Ok(CombineMethod::Wasp),
            "dpmc" => Ok(CombineMethod::Dpmc),
            other => Err(Error::InvalidArgument(format!(
                "unknown combine method '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for CombineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `kT` combined draws plus the moments that produced them.
#[derive(Debug, Clone)]
pub struct CombinedPosterior {
    pub method: CombineMethod,
    pub draws: DrawMatrix,
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
    pub barycenter: Option<BarycenterResult>,
}

fn check_inputs(subset_draws: &[DrawMatrix], summaries: &[MomentSummary]) -> Result<usize> {
    if subset_draws.is_empty() {
        return Err(Error::InvalidArgument("no subsets to combine".into()));
    }
    if subset_draws.len() != summaries.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} draw sets with {} summaries",
            subset_draws.len(),
            summaries.len()
        )));
    }
    let d = subset_draws[0].dim();
    let names = subset_draws[0].param_names();
    for (j, (dr, s)) in subset_draws.iter().zip(summaries).enumerate() {
        if dr.dim() != d || s.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "subset {} has dimension {} (summary {}), expected {d}",
                j + 1,
                dr.dim(),
                s.dim()
            )));
        }
        if dr.param_names() != names {
            return Err(Error::DimensionMismatch(format!(
                "subset {} has different parameter names",
                j + 1
            )));
        }
    }
    Ok(d)
}

fn stack_blocks(blocks: Vec<DMatrix<f64>>, d: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, d);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.nrows()).copy_from(&b);
        offset += b.nrows();
    }
    out
}

fn merged_diagnostics(subset_draws: &[DrawMatrix]) -> DrawDiagnostics {
    DrawDiagnostics {
        acceptance_rate: None,
        seed_used: subset_draws[0].diagnostics().seed_used,
    }
}

/// Center and scale each subset's draws, then map them onto the barycenter:
/// row `(j−1)T + t` is `μ̄ + Σ̄^{1/2} Σ̂_j^{-1/2} (θ_j^{(t)} − μ̂_j)`.
pub fn wasp_transform(
    subset_draws: &[DrawMatrix],
    summaries: &[MomentSummary],
    bary: &BarycenterResult,
    clamp_tol: f64,
) -> Result<CombinedPosterior> {
    let d = check_inputs(subset_draws, summaries)?;
    if bary.mean.len() != d {
        return Err(Error::DimensionMismatch(
            "barycenter dimension differs from subsets".into(),
        ));
    }
    let bary_root = linalg::psd_sqrt(&bary.cov, clamp_tol)?;
    let blocks = exec::map_indexed(subset_draws.len(), |j| -> Result<DMatrix<f64>> {
        let s = &summaries[j];
        let inv_root = linalg::psd_inv_sqrt(&s.cov, clamp_tol)
            .map_err(|e| with_context(e, format!("subset {}", j + 1)))?;
        // rows transform as x ↦ Aᵀ-multiplication on the right
        let map_t = (bary_root.as_matrix() * inv_root.as_matrix()).transpose();
        let mut centered = subset_draws[j].matrix().clone();
        for mut row in centered.row_iter_mut() {
            row -= s.mean.transpose();
        }
        let mut out = centered * map_t;
        for mut row in out.row_iter_mut() {
            row += bary.mean.transpose();
        }
        Ok(out)
    });
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let draws = DrawMatrix::new(
        stack_blocks(blocks, d),
        subset_draws[0].param_names().to_vec(),
        merged_diagnostics(subset_draws),
    )?;
    Ok(CombinedPosterior {
        method: CombineMethod::Wasp,
        draws,
        mean: bary.mean.clone(),
        cov: bary.cov.clone(),
        barycenter: Some(bary.clone()),
    })
}

/// Recenter every subset's draws on the average of the subset means.
pub fn dpmc_combine(
    subset_draws: &[DrawMatrix],
    summaries: &[MomentSummary],
) -> Result<CombinedPosterior> {
    let d = check_inputs(subset_draws, summaries)?;
    let means: Vec<_> = summaries.iter().map(|s| s.mean.clone()).collect();
    let mean = barycenter_mean(&means)?;
    let blocks: Vec<DMatrix<f64>> = exec::map_indexed(subset_draws.len(), |j| {
        let shift = &mean - &summaries[j].mean;
        let mut out = subset_draws[j].matrix().clone();
        for mut row in out.row_iter_mut() {
            row += shift.transpose();
        }
        out
    });
    let mut cov = DMatrix::zeros(d, d);
    for s in summaries {
        cov += s.cov.as_matrix();
    }
    let cov = SymMatrix::symmetrized(cov / summaries.len() as f64);
    let draws = DrawMatrix::new(
        stack_blocks(blocks, d),
        subset_draws[0].param_names().to_vec(),
        merged_diagnostics(subset_draws),
    )?;
    Ok(CombinedPosterior {
        method: CombineMethod::Dpmc,
        draws,
        mean,
        cov,
        barycenter: None,
    })
}

/// Summaries, barycenter and transform in one call.
pub fn combine(
    method: CombineMethod,
    subset_draws: &[DrawMatrix],
    config: &FixedPointConfig,
) -> Result<CombinedPosterior> {
    let summaries = moment_summaries(subset_draws)?;
    match method {
        CombineMethod::Wasp => {
            let bary = barycenter(&summaries, config)?;
            wasp_transform(subset_draws, &summaries, &bary, config.clamp_tol)
        }
        CombineMethod::Dpmc => dpmc_combine(subset_draws, &summaries),
    }
}

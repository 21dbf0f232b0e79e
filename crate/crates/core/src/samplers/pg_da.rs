use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use super::chain::ChainRecorder;
use super::polya_gamma::PgOne;
use super::ChainConfig;
use crate::draws::{indexed_names, DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};
use crate::glm::{CoefPrior, Dataset, Family, PriorSpec};
use crate::rng::{self, Stream};

/// `κ_i = y_i − s_i/2`.
pub fn kappa(y: &[f64], trials: &[u32]) -> DVector<f64> {
    DVector::from_iterator(
        y.len(),
        y.iter().zip(trials).map(|(&y, &s)| y - 0.5 * s as f64),
    )
}

/// Pólya-Gamma data-augmentation Gibbs sampler for binomial logistic regression.
///
/// Alternates `ω_i ~ PG(s_i, |x_iᵀβ|)` and `β | ω ~ N(m_ω, V_ω)` where
/// `V_ω⁻¹ = power·XᵀΩX + Σβ⁻¹` and `m_ω = V_ω(power·Xᵀκ + Σβ⁻¹μβ)`.
/// Starts from `β = 0`.
pub fn pg_da_sampler(
    data: &Dataset,
    prior: &PriorSpec,
    power: f64,
    cfg: &ChainConfig,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    data.validate_for(Family::LogisticBinomial)?;
    if !(power >= 1.0) || !power.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "likelihood power must be finite and >= 1, got {power}"
        )));
    }
    let trials = data
        .trials
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("logistic data needs a trials vector".into()))?;
    let (prior_mean, prior_cov) = match &prior.kind {
        CoefPrior::Gaussian { mean, cov } => (mean, cov),
        CoefPrior::ImproperLinear => {
            return Err(Error::InvalidArgument(
                "Pólya-Gamma sampler needs a Gaussian prior".into(),
            ))
        }
    };
    let (n, p) = (data.n(), data.p());
    if prior_mean.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "prior has dimension {}, design has {p} columns",
            prior_mean.len()
        )));
    }
    let prior_prec = Cholesky::<f64, Dyn>::new(prior_cov.as_matrix().clone())
        .ok_or(Error::NotPsd {
            min_eigenvalue: crate::linalg::sym_eigen(prior_cov)
                .map(|e| e.min_eigenvalue())
                .unwrap_or(f64::NAN),
        })?
        .inverse();
    let x = &data.x;
    let rhs = x.tr_mul(&kappa(&data.y, trials)) * power + &prior_prec * prior_mean;

    let mut rng = rng::seeded(cfg.seed, Stream::Chain);
    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut omega = DVector::zeros(n);
    let mut xw = DMatrix::zeros(n, p);
    let mut prec = DMatrix::zeros(p, p);
    let mut rec = ChainRecorder::new(cfg, p);

    for it in 1..=cfg.total_iters {
        eta.gemv(1.0, x, &beta, 0.0);
        for i in 0..n {
            let pg = PgOne::new(eta[i]);
            omega[i] = (0..trials[i]).map(|_| pg.sample(&mut rng)).sum();
        }
        xw.copy_from(x);
        for mut col in xw.column_iter_mut() {
            col.component_mul_assign(&omega);
        }
        prec.copy_from(&prior_prec);
        prec.gemm_tr(power, x, &xw, 1.0);
        let chol = Cholesky::<f64, Dyn>::new(prec.clone()).ok_or_else(|| {
            Error::Numerical(format!(
                "β-conditional precision lost positive definiteness at iteration {it}"
            ))
        })?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let dev = chol
            .l()
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        beta = mean + dev;
        rec.offer(it, &beta);
    }
    rec.finish(
        indexed_names("beta", p),
        DrawDiagnostics {
            acceptance_rate: None,
            seed_used: cfg.seed,
        },
    )
}

//! Posterior samplers: conjugate linear, Pólya-Gamma Gibbs for logistic
//! regression and adaptive random-walk Metropolis for everything else.

mod chain;
mod conjugate;
mod ess;
mod mh;
mod pg_da;
mod polya_gamma;

use nalgebra::{DMatrix, DVector};

pub use chain::{postprocess_chain, ChainConfig};
pub use conjugate::{
    conjugate_linear_sampler, linear_posterior, mvt_sample, LinearPosterior, MvtSampler,
};
pub use ess::effective_sample_size;
pub use mh::{adaptive_mh_sampler, LogDensity, MhSettings};
pub use pg_da::{kappa, pg_da_sampler};
pub use polya_gamma::{pg_mean, sample_pg, PgOne};

use crate::draws::{indexed_names, DrawMatrix};
use crate::error::{Error, Result};
use crate::glm::{param_names, Dataset, Family, GlmSpec, Posterior};

/// Which sampler produces the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    /// Conjugate for linear, Pólya-Gamma for logistic, Metropolis otherwise.
    #[default]
    Auto,
    Conjugate,
    PolyaGamma,
    AdaptiveMh,
}

impl SamplerKind {
    pub fn resolve(self, family: Family) -> Result<SamplerKind> {
        let kind = match (self, family) {
            (SamplerKind::Auto, Family::Linear) => SamplerKind::Conjugate,
            (SamplerKind::Auto, Family::LogisticBinomial) => SamplerKind::PolyaGamma,
            (SamplerKind::Auto, _) => SamplerKind::AdaptiveMh,
            (SamplerKind::Conjugate, f) if f != Family::Linear => {
                return Err(Error::InvalidArgument(format!(
                    "no conjugate sampler for family {f}"
                )))
            }
            (SamplerKind::PolyaGamma, f) if f != Family::LogisticBinomial => {
                return Err(Error::InvalidArgument(format!(
                    "Pólya-Gamma sampler only handles logistic models, not {f}"
                )))
            }
            (k, _) => k,
        };
        Ok(kind)
    }
}

/// Draws from the powered posterior of `spec` with the family's default sampler.
///
/// Output columns follow [`param_names`]: coefficients, then `phi` on its
/// natural scale for the negative binomial. Linear draws hold `β` only.
pub fn fit_posterior(data: &Dataset, spec: &GlmSpec, cfg: &ChainConfig) -> Result<DrawMatrix> {
    fit_posterior_with(data, spec, cfg, SamplerKind::Auto)
}

pub fn fit_posterior_with(
    data: &Dataset,
    spec: &GlmSpec,
    cfg: &ChainConfig,
    kind: SamplerKind,
) -> Result<DrawMatrix> {
    spec.validate()?;
    data.validate_for(spec.family)?;
    match kind.resolve(spec.family)? {
        SamplerKind::Conjugate => conjugate_linear_sampler(data, spec.power, cfg),
        SamplerKind::PolyaGamma => pg_da_sampler(data, &spec.prior, spec.power, cfg),
        _ => {
            let post = Posterior::new(spec, data)?;
            let d = post.layout().dim();
            let raw_names = indexed_names("theta", d);
            let raw = adaptive_mh_sampler(
                &post,
                &DVector::zeros(d),
                raw_names,
                cfg,
                &MhSettings::default(),
            )?;
            to_natural_scale(raw, spec.family, data)
        }
    }
}

fn to_natural_scale(raw: DrawMatrix, family: Family, data: &Dataset) -> Result<DrawMatrix> {
    let diag = raw.diagnostics();
    match family {
        // σ² is a nuisance here; report β only, as the conjugate sampler does
        Family::Linear => {
            let p = data.p();
            let kept = raw.select_columns(&(0..p).collect::<Vec<_>>())?;
            DrawMatrix::new(kept.matrix().clone(), indexed_names("beta", p), diag)
        }
        Family::NegativeBinomial => {
            let mut m: DMatrix<f64> = raw.matrix().clone();
            let last = m.ncols() - 1;
            m.column_mut(last).apply(|v| *v = v.exp());
            DrawMatrix::new(m, param_names(family, data)?, diag)
        }
        _ => DrawMatrix::new(raw.matrix().clone(), param_names(family, data)?, diag),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycenter::moment_summary;
    use crate::glm::{simulate_linear, simulate_logistic, simulate_negbin, PriorSpec};

    #[test]
    fn dispatch_by_family() {
        assert_eq!(
            SamplerKind::Auto.resolve(Family::Linear).unwrap(),
            SamplerKind::Conjugate
        );
        assert_eq!(
            SamplerKind::Auto.resolve(Family::LogisticBinomial).unwrap(),
            SamplerKind::PolyaGamma
        );
        assert_eq!(
            SamplerKind::Auto.resolve(Family::NegativeBinomial).unwrap(),
            SamplerKind::AdaptiveMh
        );
        assert!(SamplerKind::PolyaGamma.resolve(Family::Linear).is_err());
        assert!(SamplerKind::Conjugate
            .resolve(Family::MultinomialLogistic)
            .is_err());
    }

    #[test]
    fn negbin_reports_phi_on_natural_scale() {
        let (d, _) = simulate_negbin(300, 2, 3).unwrap();
        let spec = GlmSpec::new(
            Family::NegativeBinomial,
            PriorSpec::default_for(Family::NegativeBinomial, 2),
            1.0,
        )
        .unwrap();
        let cfg = ChainConfig::new(3000, 1000, 2, 4).unwrap();
        let draws = fit_posterior(&d, &spec, &cfg).unwrap();
        assert_eq!(draws.param_names().last().unwrap(), "phi");
        assert!(draws.column(2).iter().all(|&v| v > 0.0));
        let rate = draws.diagnostics().acceptance_rate.unwrap();
        assert!((0.1..=0.5).contains(&rate), "{rate}");
    }

    #[test]
    fn linear_conjugate_and_metropolis_agree() {
        let (d, _) = simulate_linear(200, 2, 1.0, 12).unwrap();
        let spec = GlmSpec::new(Family::Linear, PriorSpec::improper_linear(), 1.0).unwrap();
        let exact = linear_posterior(&d, 1.0).unwrap();
        let cfg = ChainConfig::new(40_000, 5_000, 5, 2).unwrap();
        let mh = fit_posterior_with(&d, &spec, &cfg, SamplerKind::AdaptiveMh).unwrap();
        assert_eq!(mh.dim(), 2);
        let s = moment_summary(&mh).unwrap();
        let cov = exact.covariance();
        for j in 0..2 {
            let ess = effective_sample_size(&mh.column(j));
            let se = (cov.get(j, j) / ess).sqrt();
            assert!((s.mean[j] - exact.location[j]).abs() < 4.0 * se, "mean {j}");
            let rel = (s.cov.get(j, j).sqrt() / cov.get(j, j).sqrt() - 1.0).abs();
            assert!(rel < 0.15, "sd {j}: {rel}");
        }
    }

    #[test]
    fn fits_are_deterministic() {
        let (d, _) = simulate_logistic(300, 2, 15, 1).unwrap();
        let spec = GlmSpec::new(
            Family::LogisticBinomial,
            PriorSpec::isotropic(2, 100.0),
            1.0,
        )
        .unwrap();
        let cfg = ChainConfig::new(600, 100, 5, 77).unwrap();
        assert_eq!(
            fit_posterior(&d, &spec, &cfg).unwrap(),
            fit_posterior(&d, &spec, &cfg).unwrap()
        );
        let other = fit_posterior(&d, &spec, &cfg.with_seed(78)).unwrap();
        assert_ne!(fit_posterior(&d, &spec, &cfg).unwrap(), other);
    }
}

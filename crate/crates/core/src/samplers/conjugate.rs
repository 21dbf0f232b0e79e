use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::ChainConfig;
use crate::draws::{indexed_names, DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::linalg::{self, SymMatrix, DEFAULT_CLAMP_TOL};
use crate::rng::{self, Stream};

/// Multivariate t sampler with the scale root computed once.
#[derive(Debug, Clone)]
pub struct MvtSampler {
    df: f64,
    loc: DVector<f64>,
    root: DMatrix<f64>,
    chi: ChiSquared<f64>,
}

impl MvtSampler {
    pub fn new(df: f64, loc: DVector<f64>, scale: &SymMatrix) -> Result<Self> {
        if !(df > 0.0) || !df.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "degrees of freedom must be > 0, got {df}"
            )));
        }
        if loc.len() != scale.dim() {
            return Err(Error::DimensionMismatch(format!(
                "location has length {}, scale is {}×{}",
                loc.len(),
                scale.dim(),
                scale.dim()
            )));
        }
        let root = linalg::psd_sqrt(scale, DEFAULT_CLAMP_TOL)?.into_inner();
        let chi = ChiSquared::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(MvtSampler { df, loc, root, chi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.loc.len(), |_, _| StandardNormal.sample(rng));
        let w: f64 = self.chi.sample(rng);
        &self.loc + (&self.root * z) * (self.df / w).sqrt()
    }
}

/// One draw `loc + scale^{1/2} z sqrt(df/χ²_df)`.
pub fn mvt_sample<R: Rng + ?Sized>(
    df: f64,
    loc: &DVector<f64>,
    scale: &SymMatrix,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(MvtSampler::new(df, loc.clone(), scale)?.sample(rng))
}

/// Closed-form powered posterior of `β` under `π(β, σ²) ∝ σ⁻²`.
///
/// `β | y ~ t_ν(β̂, s²(XᵀX)⁻¹)` with `ν = power·m − p` and
/// `s² = power·‖y − Xβ̂‖² / ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPosterior {
    pub location: DVector<f64>,
    pub scale: SymMatrix,
    pub df: f64,
}

impl LinearPosterior {
    pub fn mean(&self) -> &DVector<f64> {
        &self.location
    }

    /// `scale · ν/(ν − 2)`.
    pub fn covariance(&self) -> SymMatrix {
        self.scale.scaled(self.df / (self.df - 2.0))
    }
}

pub fn linear_posterior(data: &Dataset, power: f64) -> Result<LinearPosterior> {
    if !(power >= 1.0) || !power.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "likelihood power must be finite and >= 1, got {power}"
        )));
    }
    let (m, p) = (data.n(), data.p());
    if m <= p + 2 {
        return Err(Error::InsufficientData(format!(
            "conjugate linear posterior needs more than p + 2 = {} rows, got {m}",
            p + 2
        )));
    }
    let xtx = data.x.tr_mul(&data.x);
    let eig = linalg::sym_eigen(&SymMatrix::new(xtx.clone())?)?;
    let singular = Error::Singular {
        min_eigenvalue: eig.min_eigenvalue(),
        context: Some("design XᵀX".into()),
    };
    if eig.min_eigenvalue() <= 1e-12 * eig.max_eigenvalue().abs() {
        return Err(singular);
    }
    let chol = Cholesky::<f64, Dyn>::new(xtx).ok_or(singular)?;
    let y = DVector::from_column_slice(&data.y);
    let beta_hat = chol.solve(&data.x.tr_mul(&y));
    let rss = (&y - &data.x * &beta_hat).norm_squared();
    let df = power * m as f64 - p as f64;
    let s2 = power * rss / df;
    let scale = SymMatrix::new(chol.inverse() * s2)?;
    Ok(LinearPosterior {
        location: beta_hat,
        scale,
        df,
    })
}

/// `T = cfg.retained()` i.i.d. draws of `β` from [`linear_posterior`].
pub fn conjugate_linear_sampler(
    data: &Dataset,
    power: f64,
    cfg: &ChainConfig,
) -> Result<DrawMatrix> {
    cfg.validate()?;
    let post = linear_posterior(data, power)?;
    let sampler = MvtSampler::new(post.df, post.location.clone(), &post.scale)?;
    let mut rng = rng::seeded(cfg.seed, Stream::Chain);
    let rows: Vec<DVector<f64>> = (0..cfg.retained())
        .map(|_| sampler.sample(&mut rng))
        .collect();
    DrawMatrix::from_rows(
        &rows,
        indexed_names("beta", data.p()),
        DrawDiagnostics {
            acceptance_rate: None,
            seed_used: cfg.seed,
        },
    )
}

//! Generalized linear models: data container, model specification, powered
//! log posteriors and synthetic data generators.

mod likelihood;
mod simulate;

pub use likelihood::{log_posterior_pow, multinomial_logit_loglik, Posterior};
pub use simulate::{
    alternating_beta, multinomial_beta, simulate_linear, simulate_logistic,
    simulate_logistic_with_beta, simulate_multinomial, simulate_negbin,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Responses, design matrix and per-sample auxiliaries for one GLM problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    /// Binomial trial counts `s_i`.
    pub trials: Option<Vec<u32>>,
    /// Number of response categories for multinomial data (labels `1..=J`).
    pub n_categories: Option<usize>,
    pub predictor_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, trials: Option<Vec<u32>>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(y, x, trials, names)
    }

    pub fn with_names(
        y: Vec<f64>,
        x: DMatrix<f64>,
        trials: Option<Vec<u32>>,
        predictor_names: Vec<String>,
    ) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for a design matrix with {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if let Some(t) = &trials {
            if t.len() != y.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} trial counts for {} responses",
                    t.len(),
                    y.len()
                )));
            }
            for (i, (&yi, &si)) in y.iter().zip(t).enumerate() {
                if si == 0 || yi < 0.0 || yi > si as f64 || yi.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "row {}: binomial response {yi} is not an integer in [0, {si}] with s_i >= 1",
                        i + 1
                    )));
                }
            }
        }
        if predictor_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictor names for {} columns",
                predictor_names.len(),
                x.ncols()
            )));
        }
        Ok(Self {
            y,
            x,
            trials,
            n_categories: None,
            predictor_names,
        })
    }

    /// Marks the response as categorical with labels `1..=n_categories`.
    pub fn with_categories(mut self, n_categories: usize) -> Result<Self> {
        if n_categories < 2 {
            return Err(Error::InvalidArgument(
                "multinomial data needs at least 2 categories".into(),
            ));
        }
        if let Some((i, y)) = self
            .y
            .iter()
            .enumerate()
            .find(|(_, &y)| y.fract() != 0.0 || y < 1.0 || y > n_categories as f64)
        {
            return Err(Error::InvalidArgument(format!(
                "row {}: category {y} outside 1..={n_categories}",
                i + 1
            )));
        }
        self.n_categories = Some(n_categories);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(idx),
            trials: self
                .trials
                .as_ref()
                .map(|t| idx.iter().map(|&i| t[i]).collect()),
            n_categories: self.n_categories,
            predictor_names: self.predictor_names.clone(),
        }
    }

    /// Checks that the data carry what `family` needs.
    pub fn validate_for(&self, family: Family) -> Result<()> {
        if self.n() == 0 || self.p() == 0 {
            return Err(Error::InsufficientData("empty dataset".into()));
        }
        match family {
            Family::Linear => Ok(()),
            Family::LogisticBinomial => {
                if self.trials.is_none() {
                    return Err(Error::InvalidArgument(
                        "binomial data need a trials column".into(),
                    ));
                }
                Ok(())
            }
            Family::NegativeBinomial => {
                if let Some((i, y)) = self
                    .y
                    .iter()
                    .enumerate()
                    .find(|(_, &y)| y < 0.0 || y.fract() != 0.0)
                {
                    return Err(Error::InvalidArgument(format!(
                        "row {}: count response {y} is not a non-negative integer",
                        i + 1
                    )));
                }
                Ok(())
            }
            Family::MultinomialLogistic => match self.n_categories {
                Some(_) => Ok(()),
                None => Err(Error::InvalidArgument(
                    "multinomial data need the number of categories".into(),
                )),
            },
        }
    }
}

/// Response family together with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Gaussian response, identity link.
    Linear,
    /// Binomial response with trials, logit link.
    LogisticBinomial,
    /// NB2 counts (variance `μ + μ²/φ`), log link.
    NegativeBinomial,
    /// Categorical response, baseline-category logit with the last category as baseline.
    MultinomialLogistic,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::LogisticBinomial => "logistic",
            Family::NegativeBinomial => "negbin",
            Family::MultinomialLogistic => "multinomial",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "gaussian" => Ok(Family::Linear),
            "logistic" | "logistic_binomial" | "binomial" => Ok(Family::LogisticBinomial),
            "negbin" | "negative_binomial" | "nb" => Ok(Family::NegativeBinomial),
            "multinomial" | "multinomial_logistic" => Ok(Family::MultinomialLogistic),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// Prior on the regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefPrior {
    /// `π(β, σ²) ∝ σ⁻²`, linear family only.
    ImproperLinear,
    Gaussian {
        mean: DVector<f64>,
        cov: SymMatrix,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionPrior {
    HalfNormal { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub kind: CoefPrior,
    pub negbin_dispersion: Option<DispersionPrior>,
}

/// Default coefficient prior variance for the non-linear families.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 100.0;
/// Default half-normal scale on the negative-binomial dispersion.
pub const DEFAULT_DISPERSION_SCALE: f64 = 5.0;

impl PriorSpec {
    pub fn improper_linear() -> Self {
        PriorSpec {
            kind: CoefPrior::ImproperLinear,
            negbin_dispersion: None,
        }
    }

    pub fn gaussian(mean: DVector<f64>, cov: SymMatrix) -> Self {
        PriorSpec {
            kind: CoefPrior::Gaussian { mean, cov },
            negbin_dispersion: None,
        }
    }

    pub fn isotropic(dim: usize, variance: f64) -> Self {
        Self::gaussian(
            DVector::zeros(dim),
            SymMatrix::identity(dim).scaled(variance),
        )
    }

    /// `N(0, 100 I)` on coefficients, half-normal(5) on the NB dispersion.
    pub fn default_for(family: Family, n_coefficients: usize) -> Self {
        match family {
            Family::Linear => Self::improper_linear(),
            Family::NegativeBinomial => PriorSpec {
                negbin_dispersion: Some(DispersionPrior::HalfNormal {
                    scale: DEFAULT_DISPERSION_SCALE,
                }),
                ..Self::isotropic(n_coefficients, DEFAULT_PRIOR_VARIANCE)
            },
            _ => Self::isotropic(n_coefficients, DEFAULT_PRIOR_VARIANCE),
        }
    }
}

/// Model family, prior and likelihood power `n / m_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmSpec {
    pub family: Family,
    pub prior: PriorSpec,
    pub power: f64,
}

impl GlmSpec {
    pub fn new(family: Family, prior: PriorSpec, power: f64) -> Result<Self> {
        let spec = GlmSpec {
            family,
            prior,
            power,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        GlmSpec::new(self.family, self.prior.clone(), power)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 1.0) || !self.power.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "likelihood power must be finite and >= 1, got {}",
                self.power
            )));
        }
        match (&self.family, &self.prior.kind) {
            (Family::Linear, CoefPrior::ImproperLinear) => {}
            (Family::Linear, _) => {
                return Err(Error::InvalidArgument(
                    "the linear family uses the improper prior π(β, σ²) ∝ σ⁻²".into(),
                ))
            }
            (_, CoefPrior::ImproperLinear) => {
                return Err(Error::InvalidArgument(format!(
                    "family {} needs a Gaussian coefficient prior",
                    self.family
                )))
            }
            (_, CoefPrior::Gaussian { mean, cov }) => {
                if mean.len() != cov.dim() {
                    return Err(Error::DimensionMismatch(
                        "prior mean and covariance differ in dimension".into(),
                    ));
                }
                crate::linalg::psd_sqrt(cov, crate::linalg::DEFAULT_CLAMP_TOL)?;
            }
        }
        if self.family == Family::NegativeBinomial && self.prior.negbin_dispersion.is_none() {
            return Err(Error::InvalidArgument(
                "negative binomial needs a dispersion prior".into(),
            ));
        }
        if let Some(DispersionPrior::HalfNormal { scale }) = self.prior.negbin_dispersion {
            if !(scale > 0.0) {
                return Err(Error::InvalidArgument(
                    "dispersion prior scale must be > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Model parameters; `extra` holds `log σ²` (linear) or `log φ` (negative binomial).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    /// Coefficients; for multinomial models the `J − 1` blocks are stacked.
    pub beta: DVector<f64>,
    pub extra: Option<f64>,
}

impl ParamVector {
    pub fn new(beta: DVector<f64>, extra: Option<f64>) -> Self {
        ParamVector { beta, extra }
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.beta.iter().copied().collect();
        v.extend(self.extra);
        DVector::from_vec(v)
    }

    pub fn from_flat(flat: &DVector<f64>, has_extra: bool) -> ParamVector {
        let n_beta = flat.len() - usize::from(has_extra);
        ParamVector {
            beta: flat.rows(0, n_beta).into_owned(),
            extra: has_extra.then(|| flat[n_beta]),
        }
    }
}

/// Shape of the sampled parameter vector for a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_beta: usize,
    pub has_extra: bool,
}

impl ParamLayout {
    pub fn for_data(family: Family, data: &Dataset) -> Result<Self> {
        let p = data.p();
        Ok(match family {
            Family::Linear => ParamLayout {
                n_beta: p,
                has_extra: true,
            },
            Family::LogisticBinomial => ParamLayout {
                n_beta: p,
                has_extra: false,
            },
            Family::NegativeBinomial => ParamLayout {
                n_beta: p,
                has_extra: true,
            },
            Family::MultinomialLogistic => {
                let j = data.n_categories.ok_or_else(|| {
                    Error::InvalidArgument("multinomial data need the number of categories".into())
                })?;
                ParamLayout {
                    n_beta: (j - 1) * p,
                    has_extra: false,
                }
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n_beta + usize::from(self.has_extra)
    }
}

/// Labels of the reported parameters (coefficients, plus `phi` for NB).
pub fn param_names(family: Family, data: &Dataset) -> Result<Vec<String>> {
    let p = data.p();
    Ok(match family {
        Family::Linear | Family::LogisticBinomial => crate::draws::indexed_names("beta", p),
        Family::NegativeBinomial => {
            let mut names = crate::draws::indexed_names("beta", p);
            names.push("phi".into());
            names
        }
        Family::MultinomialLogistic => {
            let j = data.n_categories.unwrap_or(2);
            (1..j)
                .flat_map(|c| (1..=p).map(move |l| format!("beta{c}_{l}")))
                .collect()
        }
    })
}

/// Coordinate blocks for per-block error reporting (one block per category
/// for multinomial models, none otherwise).
pub fn param_blocks(family: Family, data: &Dataset) -> Vec<(String, Vec<usize>)> {
    match (family, data.n_categories) {
        (Family::MultinomialLogistic, Some(j)) => {
            let p = data.p();
            (0..j - 1)
                .map(|c| (format!("beta{}", c + 1), (c * p..(c + 1) * p).collect()))
                .collect()
        }
        _ => Vec::new(),
    }
}

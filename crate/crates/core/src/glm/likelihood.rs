use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{CoefPrior, Dataset, DispersionPrior, Family, GlmSpec, ParamLayout, ParamVector};
use crate::error::{Error, Result};

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

#[derive(Debug, Clone)]
enum PreparedPrior {
    Improper,
    Gaussian {
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        log_norm: f64,
    },
}

impl PreparedPrior {
    fn new(kind: &CoefPrior) -> Result<Self> {
        match kind {
            CoefPrior::ImproperLinear => Ok(PreparedPrior::Improper),
            CoefPrior::Gaussian { mean, cov } => {
                let chol =
                    Cholesky::<f64, Dyn>::new(cov.as_matrix().clone()).ok_or(Error::Singular {
                        min_eigenvalue: 0.0,
                        context: Some("prior covariance".into()),
                    })?;
                let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
                let d = mean.len() as f64;
                Ok(PreparedPrior::Gaussian {
                    mean: mean.clone(),
                    precision: chol.inverse(),
                    log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
                })
            }
        }
    }
}

/// Powered log posterior of a GLM on one dataset, with cached prior terms.
///
/// Evaluates `power · log ℓ(θ) + log π(θ)`, where scale parameters live on the
/// log scale and the prior includes the Jacobian of that transform.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    family: Family,
    power: f64,
    data: &'a Dataset,
    layout: ParamLayout,
    prior: PreparedPrior,
    dispersion: Option<DispersionPrior>,
}

impl<'a> Posterior<'a> {
    pub fn new(spec: &GlmSpec, data: &'a Dataset) -> Result<Self> {
        spec.validate()?;
        data.validate_for(spec.family)?;
        let layout = ParamLayout::for_data(spec.family, data)?;
        let prior = PreparedPrior::new(&spec.prior.kind)?;
        if let PreparedPrior::Gaussian { mean, .. } = &prior {
            if mean.len() != layout.n_beta {
                return Err(Error::DimensionMismatch(format!(
                    "prior has dimension {}, model has {} coefficients",
                    mean.len(),
                    layout.n_beta
                )));
            }
        }
        Ok(Posterior {
            family: spec.family,
            power: spec.power,
            data,
            layout,
            prior,
            dispersion: spec.prior.negbin_dispersion,
        })
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.beta.len() != self.layout.n_beta || theta.extra.is_some() != self.layout.has_extra
        {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector ({} coefficients, extra: {}) does not match the model ({} coefficients, extra: {})",
                theta.beta.len(),
                theta.extra.is_some(),
                self.layout.n_beta,
                self.layout.has_extra
            )));
        }
        Ok(())
    }

    /// Unpowered log-likelihood, including normalizing constants.
    pub fn log_likelihood(&self, theta: &ParamVector) -> Result<f64> {
        self.check(theta)?;
        let d = self.data;
        Ok(match self.family {
            Family::Linear => {
                let log_var = theta.extra.unwrap_or(0.0);
                let var = log_var.exp();
                let resid = DVector::from_column_slice(&d.y) - &d.x * &theta.beta;
                -0.5 * d.n() as f64 * ((2.0 * PI).ln() + log_var) - 0.5 * resid.norm_squared() / var
            }
            Family::LogisticBinomial => {
                let eta = &d.x * &theta.beta;
                let trials = d.trials.as_ref().expect("validated");
                eta.iter()
                    .zip(&d.y)
                    .zip(trials)
                    .map(|((&e, &y), &s)| {
                        let s = s as f64;
                        ln_choose(s, y) + y * e - s * softplus(e)
                    })
                    .sum()
            }
            Family::NegativeBinomial => {
                let ln_phi = theta.extra.unwrap_or(0.0);
                let phi = ln_phi.exp();
                let eta = &d.x * &theta.beta;
                let lg_phi = ln_gamma(phi);
                eta.iter()
                    .zip(&d.y)
                    .map(|(&e, &y)| {
                        let ln_total = ln_add_exp(ln_phi, e);
                        ln_gamma(y + phi) - lg_phi - ln_gamma(y + 1.0)
                            + phi * (ln_phi - ln_total)
                            + y * (e - ln_total)
                    })
                    .sum()
            }
            Family::MultinomialLogistic => multinomial_loglik_raw(&theta.beta, d)?,
        })
    }

    /// Log prior density on the sampling scale (Jacobians included).
    pub fn log_prior(&self, theta: &ParamVector) -> Result<f64> {
        self.check(theta)?;
        let mut lp = match &self.prior {
            // π(β, σ²) ∝ 1/σ² and dσ²/dlogσ² = σ² cancel.
            PreparedPrior::Improper => 0.0,
            PreparedPrior::Gaussian {
                mean,
                precision,
                log_norm,
            } => {
                let diff = &theta.beta - mean;
                log_norm - 0.5 * diff.dot(&(precision * &diff))
            }
        };
        if self.family == Family::NegativeBinomial {
            let ln_phi = theta.extra.unwrap_or(0.0);
            let phi = ln_phi.exp();
            if let Some(DispersionPrior::HalfNormal { scale }) = self.dispersion {
                lp += (2.0 / (2.0 * PI).sqrt() / scale).ln() - 0.5 * (phi / scale).powi(2) + ln_phi;
            }
        }
        Ok(lp)
    }

    pub fn log_density(&self, theta: &ParamVector) -> Result<f64> {
        let v = self.power * self.log_likelihood(theta)? + self.log_prior(theta)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    }

    /// Log density at a flat (unconstrained) parameter vector; `−∞` off support.
    pub fn log_density_flat(&self, flat: &DVector<f64>) -> f64 {
        if flat.len() != self.layout.dim() || flat.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.log_density(&ParamVector::from_flat(flat, self.layout.has_extra))
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Analytic gradient of [`Posterior::log_density_flat`].
    pub fn gradient_flat(&self, flat: &DVector<f64>) -> Result<DVector<f64>> {
        if flat.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "gradient at a vector of length {}, model has {}",
                flat.len(),
                self.layout.dim()
            )));
        }
        let theta = ParamVector::from_flat(flat, self.layout.has_extra);
        let d = self.data;
        let nb = self.layout.n_beta;
        let mut grad = DVector::zeros(self.layout.dim());
        match self.family {
            Family::Linear => {
                let log_var = theta.extra.unwrap_or(0.0);
                let var = log_var.exp();
                let resid = DVector::from_column_slice(&d.y) - &d.x * &theta.beta;
                let gb = d.x.tr_mul(&resid) * (self.power / var);
                grad.rows_mut(0, nb).copy_from(&gb);
                grad[nb] = self.power * (-0.5 * d.n() as f64 + 0.5 * resid.norm_squared() / var);
            }
            Family::LogisticBinomial => {
                let eta = &d.x * &theta.beta;
                let trials = d.trials.as_ref().expect("validated");
                let w = DVector::from_iterator(
                    d.n(),
                    eta.iter()
                        .zip(&d.y)
                        .zip(trials)
                        .map(|((&e, &y), &s)| y - s as f64 * logistic(e)),
                );
                grad.rows_mut(0, nb)
                    .copy_from(&(d.x.tr_mul(&w) * self.power));
            }
            Family::NegativeBinomial => {
                let ln_phi = theta.extra.unwrap_or(0.0);
                let phi = ln_phi.exp();
                let eta = &d.x * &theta.beta;
                let dg_phi = digamma(phi);
                let mut g_ln_phi = 0.0;
                let w = DVector::from_iterator(
                    d.n(),
                    eta.iter().zip(&d.y).map(|(&e, &y)| {
                        let ln_total = ln_add_exp(ln_phi, e);
                        let total = ln_total.exp();
                        let mu = e.exp();
                        g_ln_phi += phi
                            * (digamma(y + phi) - dg_phi + ln_phi - ln_total + 1.0
                                - (y + phi) / total);
                        (y - mu) * phi / total
                    }),
                );
                grad.rows_mut(0, nb)
                    .copy_from(&(d.x.tr_mul(&w) * self.power));
                grad[nb] = self.power * g_ln_phi;
                if let Some(DispersionPrior::HalfNormal { scale }) = self.dispersion {
                    grad[nb] += 1.0 - phi * phi / (scale * scale);
                }
            }
            Family::MultinomialLogistic => {
                let g = multinomial_gradient_raw(&theta.beta, d)?;
                grad.rows_mut(0, nb).copy_from(&(g * self.power));
            }
        }
        if let PreparedPrior::Gaussian {
            mean, precision, ..
        } = &self.prior
        {
            let gp = -(precision * (&theta.beta - mean));
            let mut head = grad.rows_mut(0, nb);
            head += gp;
        }
        Ok(grad)
    }
}

/// `power · log ℓ(θ) + log π(θ)` for a single evaluation.
pub fn log_posterior_pow(spec: &GlmSpec, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    Posterior::new(spec, data)?.log_density(theta)
}

fn multinomial_predictors(beta: &DVector<f64>, data: &Dataset) -> Result<(usize, DMatrix<f64>)> {
    let j = data.n_categories.ok_or_else(|| {
        Error::InvalidArgument("multinomial data need the number of categories".into())
    })?;
    let p = data.p();
    if beta.len() != (j - 1) * p {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} categories and {p} predictors",
            beta.len(),
            j
        )));
    }
    let blocks = DMatrix::from_column_slice(p, j - 1, beta.as_slice());
    Ok((j, &data.x * blocks))
}

fn category(y: f64, j: usize, row: usize) -> Result<usize> {
    if y.fract() != 0.0 || y < 1.0 || y > j as f64 {
        return Err(Error::InvalidArgument(format!(
            "row {}: category {y} outside 1..={j}",
            row + 1
        )));
    }
    Ok(y as usize)
}

/// Log-sum-exp of a row of predictors with the baseline predictor 0 appended.
fn row_log_normalizer(eta: &DMatrix<f64>, i: usize) -> f64 {
    let m = eta.row(i).iter().fold(0.0_f64, |m, &v| m.max(v));
    let s: f64 = eta.row(i).iter().map(|&v| (v - m).exp()).sum::<f64>() + (-m).exp();
    m + s.ln()
}

fn multinomial_loglik_raw(beta: &DVector<f64>, data: &Dataset) -> Result<f64> {
    let (j, eta) = multinomial_predictors(beta, data)?;
    let mut ll = 0.0;
    for (i, &y) in data.y.iter().enumerate() {
        let c = category(y, j, i)?;
        let own = if c == j { 0.0 } else { eta[(i, c - 1)] };
        ll += own - row_log_normalizer(&eta, i);
    }
    Ok(ll)
}

fn multinomial_gradient_raw(beta: &DVector<f64>, data: &Dataset) -> Result<DVector<f64>> {
    let (j, eta) = multinomial_predictors(beta, data)?;
    let mut resid = DMatrix::zeros(data.n(), j - 1);
    for (i, &y) in data.y.iter().enumerate() {
        let c = category(y, j, i)?;
        let lz = row_log_normalizer(&eta, i);
        for k in 0..j - 1 {
            let indicator = if c == k + 1 { 1.0 } else { 0.0 };
            resid[(i, k)] = indicator - (eta[(i, k)] - lz).exp();
        }
    }
    let g = data.x.tr_mul(&resid);
    Ok(DVector::from_column_slice(g.as_slice()))
}

/// Powered baseline-category logit log-likelihood; the last category has
/// coefficients fixed at zero.
pub fn multinomial_logit_loglik(betas: &ParamVector, data: &Dataset, power: f64) -> Result<f64> {
    Ok(power * multinomial_loglik_raw(&betas.beta, data)?)
}

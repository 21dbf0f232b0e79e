use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson, StandardNormal};

use super::{Dataset, ParamVector};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng, Stream};

/// `(−a, a, −a, a, …)` of length `p`.
pub fn alternating_beta(p: usize, magnitude: f64) -> DVector<f64> {
    DVector::from_fn(p, |j, _| if j % 2 == 0 { -magnitude } else { magnitude })
}

fn check_shape(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n, p >= 1 (got n={n}, p={p})"
        )));
    }
    Ok(())
}

fn gaussian_design(n: usize, p: usize, rng: &mut SimRng) -> DMatrix<f64> {
    // row-major fill order
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = StandardNormal.sample(rng);
        }
    }
    x
}

/// Binomial logistic data: `X` i.i.d. N(0,1), `β` alternating ±2, `s_i` fixed.
pub fn simulate_logistic(
    n: usize,
    p: usize,
    trials_per_sample: u32,
    seed: u64,
) -> Result<(Dataset, ParamVector)> {
    simulate_logistic_with_beta(n, &alternating_beta(p, 2.0), trials_per_sample, seed)
}

pub fn simulate_logistic_with_beta(
    n: usize,
    beta: &DVector<f64>,
    trials_per_sample: u32,
    seed: u64,
) -> Result<(Dataset, ParamVector)> {
    check_shape(n, beta.len())?;
    if trials_per_sample == 0 {
        return Err(Error::InvalidArgument(
            "trials per sample must be >= 1".into(),
        ));
    }
    let mut rng = rng::seeded(seed, Stream::Data);
    let x = gaussian_design(n, beta.len(), &mut rng);
    let eta = &x * beta;
    let y = eta
        .iter()
        .map(|&e| {
            let prob = 1.0 / (1.0 + (-e).exp());
            Binomial::new(trials_per_sample as u64, prob)
                .map(|b| b.sample(&mut rng) as f64)
                .map_err(|e| Error::Numerical(format!("binomial sampler: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(y, x, Some(vec![trials_per_sample; n]))?;
    Ok((data, ParamVector::new(beta.clone(), None)))
}

/// NB2 count data with mean `exp(xᵀβ)`, `β` alternating ±1 and `φ = 2`.
///
/// Drawn as a gamma–Poisson mixture: `λ ~ Gamma(φ, μ/φ)`, `y ~ Poisson(λ)`.
pub fn simulate_negbin(n: usize, p: usize, seed: u64) -> Result<(Dataset, ParamVector)> {
    check_shape(n, p)?;
    let phi = 2.0_f64;
    let beta = alternating_beta(p, 1.0);
    let mut rng = rng::seeded(seed, Stream::Data);
    let x = gaussian_design(n, p, &mut rng);
    let eta = &x * &beta;
    let mut y = Vec::with_capacity(n);
    for &e in eta.iter() {
        let mu = e.exp();
        let gamma = Gamma::new(phi, mu / phi)
            .map_err(|e| Error::Numerical(format!("gamma sampler: {e}")))?;
        let lambda: f64 = gamma.sample(&mut rng);
        let count = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::Numerical(format!("poisson sampler: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        y.push(count);
    }
    let data = Dataset::new(y, x, None)?;
    Ok((data, ParamVector::new(beta, Some(phi.ln()))))
}

/// Gaussian linear data `y = Xβ + ε`, `ε ~ N(0, σ²)`, `β` alternating ±1.
pub fn simulate_linear(
    n: usize,
    p: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, ParamVector)> {
    check_shape(n, p)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    let beta = alternating_beta(p, 1.0);
    let mut rng = rng::seeded(seed, Stream::Data);
    let x = gaussian_design(n, p, &mut rng);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mean = &x * &beta;
    let y = mean.iter().map(|&m| m + noise.sample(&mut rng)).collect();
    let data = Dataset::new(y, x, None)?;
    Ok((data, ParamVector::new(beta, Some(2.0 * sigma.ln()))))
}

/// Coefficients of category `c` (1-based) in the multinomial simulator: the
/// alternating ±1 pattern, sign-flipped on even categories.
pub fn multinomial_beta(n_categories: usize, p: usize) -> DVector<f64> {
    let mut beta = DVector::zeros((n_categories - 1) * p);
    for c in 0..n_categories - 1 {
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        beta.rows_mut(c * p, p)
            .copy_from(&(alternating_beta(p, 1.0) * sign));
    }
    beta
}

/// Categorical data with labels `1..=J`; category `J` is the baseline.
pub fn simulate_multinomial(
    n: usize,
    p: usize,
    n_categories: usize,
    seed: u64,
) -> Result<(Dataset, ParamVector)> {
    check_shape(n, p)?;
    if n_categories < 2 {
        return Err(Error::InvalidArgument(
            "multinomial data needs at least 2 categories".into(),
        ));
    }
    let beta = multinomial_beta(n_categories, p);
    let mut rng = rng::seeded(seed, Stream::Data);
    let x = gaussian_design(n, p, &mut rng);
    let mut y = Vec::with_capacity(n);
    let mut weights = vec![0.0; n_categories];
    for i in 0..n {
        for c in 0..n_categories - 1 {
            weights[c] = x.row(i).dot(&beta.rows(c * p, p).transpose());
        }
        weights[n_categories - 1] = 0.0;
        let top = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = weights.iter().map(|w| (w - top).exp()).sum();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut label = n_categories;
        for (c, w) in weights.iter().enumerate() {
            acc += (w - top).exp();
            if u < acc {
                label = c + 1;
                break;
            }
        }
        y.push(label as f64);
    }
    let data = Dataset::new(y, x, None)?.with_categories(n_categories)?;
    Ok((data, ParamVector::new(beta, None)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multinomial_labels_and_frequencies() {
        let (d, t) = simulate_multinomial(20_000, 2, 3, 5).unwrap();
        assert_eq!(t.beta.as_slice(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(d.n_categories, Some(3));
        // label counts against the summed model probabilities
        let mut expected = [0.0; 3];
        for i in 0..d.n() {
            let eta: Vec<f64> = (0..2)
                .map(|c| d.x.row(i).dot(&t.beta.rows(c * 2, 2).transpose()))
                .collect();
            let z = 1.0 + eta[0].exp() + eta[1].exp();
            expected[0] += eta[0].exp() / z;
            expected[1] += eta[1].exp() / z;
            expected[2] += 1.0 / z;
        }
        for c in 0..3 {
            let count = d.y.iter().filter(|&&y| y == (c + 1) as f64).count() as f64;
            let sd = expected[c].sqrt();
            assert!(
                (count - expected[c]).abs() < 5.0 * sd,
                "category {}: {count} vs {}",
                c + 1,
                expected[c]
            );
        }
    }

    #[test]
    fn beta_patterns() {
        let (_, t) = simulate_logistic(5, 4, 15, 1).unwrap();
        assert_eq!(t.beta.as_slice(), &[-2.0, 2.0, -2.0, 2.0]);
        let (_, t) = simulate_negbin(5, 4, 1).unwrap();
        assert_eq!(t.beta.as_slice(), &[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(t.extra, Some(2.0f64.ln()));
    }

    #[test]
    fn logistic_responses_within_trials_and_reproducible() {
        let (d, _) = simulate_logistic(500, 3, 15, 9).unwrap();
        assert!(d
            .y
            .iter()
            .all(|&y| (0.0..=15.0).contains(&y) && y.fract() == 0.0));
        let (d2, _) = simulate_logistic(500, 3, 15, 9).unwrap();
        assert_eq!(d, d2);
        let (d3, _) = simulate_logistic(500, 3, 15, 10).unwrap();
        assert_ne!(d.y, d3.y);
    }

    #[test]
    fn logistic_with_zero_beta_has_half_success_rate() {
        let (d, _) = simulate_logistic_with_beta(100_000, &DVector::zeros(2), 15, 4).unwrap();
        let rate: f64 = d.y.iter().map(|y| y / 15.0).sum::<f64>() / d.n() as f64;
        assert!((rate - 0.5).abs() < 0.01, "{rate}");
    }

    #[test]
    fn negbin_is_overdispersed_at_fixed_mean() {
        // with x ≡ 0 every row has mean 1 and variance 1 + 1/φ = 1.5
        let mut rng = rng::seeded(3, Stream::Data);
        let phi = 2.0;
        let draws: Vec<f64> = (0..200_000)
            .map(|_| {
                let lambda: f64 = Gamma::new(phi, 1.0 / phi).unwrap().sample(&mut rng);
                Poisson::new(lambda).unwrap().sample(&mut rng)
            })
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 0.02);
        assert!((var - 1.5).abs() < 0.05, "{var}");
        assert!(var > mean);

        let (d, _) = simulate_negbin(2000, 3, 2).unwrap();
        assert!(d.y.iter().all(|&y| y >= 0.0 && y.fract() == 0.0));
    }

    #[test]
    fn linear_noiseless_limit_and_noise_variance() {
        let (d, t) = simulate_linear(200, 3, 1e-12, 5).unwrap();
        let fit = &d.x * &t.beta;
        for (a, b) in fit.iter().zip(&d.y) {
            assert!((a - b).abs() < 1e-9);
        }
        let sigma = 1.7;
        let (d, t) = simulate_linear(100_000, 2, sigma, 6).unwrap();
        let resid = DVector::from_column_slice(&d.y) - &d.x * &t.beta;
        let n = resid.len() as f64;
        let m = resid.mean();
        let var = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05);
    }

    #[test]
    fn ols_recovers_linear_beta() {
        let (d, t) = simulate_linear(5000, 4, 1.0, 8).unwrap();
        let xtx = d.x.tr_mul(&d.x);
        let inv = xtx.clone().try_inverse().unwrap();
        let bhat = &inv * d.x.tr_mul(&DVector::from_column_slice(&d.y));
        let resid = DVector::from_column_slice(&d.y) - &d.x * &bhat;
        let s2 = resid.norm_squared() / (5000.0 - 4.0);
        for j in 0..4 {
            let se = (s2 * inv[(j, j)]).sqrt();
            assert!((bhat[j] - t.beta[j]).abs() < 4.0 * se);
        }
    }
}

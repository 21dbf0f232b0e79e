/// Effective sample size by Geyer's initial monotone positive sequence.
///
/// Returns the chain length for constant chains.
pub fn effective_sample_size(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let mean = chain.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = chain.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    // sums of adjacent pairs Γ_m = ρ_{2m} + ρ_{2m+1}, truncated at the first
    // non-positive one and forced non-increasing
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = acf(2 * m) + acf(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        m += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, Stream};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_chain_has_ess_near_length() {
        let mut r = seeded(4, Stream::Chain);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut r)).collect();
        let ess = effective_sample_size(&x);
        assert!(ess > 4000.0 && ess < 6500.0, "{ess}");
    }

    #[test]
    fn ar1_chain_matches_theory() {
        // AR(1) with ρ = 0.9: integrated time (1+ρ)/(1−ρ) = 19
        let mut r = seeded(5, Stream::Chain);
        let mut v = 0.0;
        let x: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut r);
                v = 0.9 * v + e;
                v
            })
            .collect();
        let ess = effective_sample_size(&x);
        let expected = 200_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }
}

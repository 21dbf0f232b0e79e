use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wasp_glm::glm::{simulate_logistic, Family, GlmSpec, PriorSpec};
use wasp_glm::partition::{partition, run_full, run_subsets_parallel};
use wasp_glm::samplers::{pg_mean, sample_pg, ChainConfig};

/// Variance of PG(1, c).
fn pg1_variance(c: f64) -> f64 {
    if c.abs() < 1e-4 {
        return 1.0 / 24.0;
    }
    (c.sinh() - c) / (4.0 * c.powi(3) * (c / 2.0).cosh().powi(2))
}

#[test]
fn pg_moments_add_over_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 40_000;
    for c in [0.0, 1.3, 6.0] {
        for b in [1u32, 5, 15] {
            let xs: Vec<f64> = (0..draws)
                .map(|_| sample_pg(b, c, &mut rng).unwrap())
                .collect();
            let mean = xs.iter().sum::<f64>() / draws as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let (m1, v1) = (pg_mean(1.0, c), pg1_variance(c));
            let se = (b as f64 * v1 / draws as f64).sqrt();
            assert!(
                (mean - b as f64 * m1).abs() < 4.0 * se,
                "b={b}, c={c}: mean {mean}"
            );
            assert!(
                (var / (b as f64 * v1) - 1.0).abs() < 0.06,
                "b={b}, c={c}: variance {var}"
            );
        }
    }
}

fn logistic_setup() -> (wasp_glm::glm::Dataset, GlmSpec) {
    let (data, _) = simulate_logistic(300, 3, 10, 9).unwrap();
    let spec = GlmSpec::new(
        Family::LogisticBinomial,
        PriorSpec::isotropic(3, 100.0),
        1.0,
    )
    .unwrap();
    (data, spec)
}

#[test]
fn single_subset_equals_full_fit_with_next_seed() {
    let (data, spec) = logistic_setup();
    let cfg = ChainConfig::new(300, 100, 2, 40).unwrap();
    let part = partition(data.n(), 1, cfg.seed).unwrap();
    let (subsets, _) = run_subsets_parallel(&data, &part, &spec, &cfg, 1).unwrap();
    let (full, _) = run_full(&data, &spec, &cfg.with_seed(cfg.seed + 1)).unwrap();
    assert_eq!(subsets[0].matrix(), full.matrix());
}

#[test]
fn worker_count_does_not_change_draws() {
    let (data, spec) = logistic_setup();
    let cfg = ChainConfig::new(200, 100, 1, 3).unwrap();
    let part = partition(data.n(), 5, cfg.seed).unwrap();
    let (one, _) = run_subsets_parallel(&data, &part, &spec, &cfg, 1).unwrap();
    let (many, timing) = run_subsets_parallel(&data, &part, &spec, &cfg, 5).unwrap();
    assert_eq!(one, many);
    assert_eq!(timing.subset_wall_clocks.len(), 5);
}

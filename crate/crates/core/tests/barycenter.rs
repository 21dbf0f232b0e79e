use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wasp_glm::barycenter::{barycenter_cov_fixed_point, barycenter_residual, FixedPointConfig};
use wasp_glm::linalg::SymMatrix;

fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let b = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * 0.2).unwrap()
}

/// Denman–Beavers iteration for the principal root of a matrix with positive spectrum.
fn principal_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (mut y, mut z) = (a.clone(), DMatrix::identity(a.nrows(), a.ncols()));
    for _ in 0..100 {
        let y_inv = y.clone().try_inverse().unwrap();
        let z_inv = z.clone().try_inverse().unwrap();
        let y_next = (&y + z_inv) / 2.0;
        z = (&z + y_inv) / 2.0;
        let step = (&y_next - &y).norm();
        y = y_next;
        if step < 1e-15 * y.norm() {
            break;
        }
    }
    y
}

fn sym_root(a: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
    let e = a.clone().symmetric_eigen();
    let l = e.eigenvalues.map(|v| v.powf(power));
    &e.eigenvectors * DMatrix::from_diagonal(&l) * e.eigenvectors.transpose()
}

/// The recursion written with non-symmetric roots of `Σ̄_t Σ_j`.
fn literal_fixed_point(covs: &[SymMatrix], iters: usize) -> DMatrix<f64> {
    let d = covs[0].dim();
    let mut s = DMatrix::identity(d, d);
    for _ in 0..iters {
        let mut m = DMatrix::zeros(d, d);
        for c in covs {
            m += principal_sqrt(&(&s * c.as_matrix()));
        }
        m /= covs.len() as f64;
        let inv_half = sym_root(&s, -0.5);
        let next = &inv_half * &m * m.transpose() * &inv_half;
        s = (&next + next.transpose()) / 2.0;
    }
    s
}

#[test]
fn literal_recursion_reaches_the_same_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &(k, d) in &[(2, 2), (5, 3), (8, 4)] {
        let covs: Vec<_> = (0..k).map(|_| random_spd(d, &mut rng)).collect();
        let ours = barycenter_cov_fixed_point(&covs, &FixedPointConfig::default()).unwrap();
        assert!(ours.converged);
        let literal = literal_fixed_point(&covs, 200);
        let gap = (ours.cov.as_matrix() - &literal).norm() / literal.norm();
        assert!(gap < 1e-8, "k={k}, d={d}: relative gap {gap}");
    }
}

#[test]
fn commuting_inputs_match_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in [2, 7, 30] {
        let diags: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..5).map(|_| rng.gen_range(0.01..10.0)).collect())
            .collect();
        let covs: Vec<_> = diags.iter().map(|v| SymMatrix::from_diagonal(v)).collect();
        let fp = barycenter_cov_fixed_point(&covs, &FixedPointConfig::default()).unwrap();
        for i in 0..5 {
            let root_mean = diags.iter().map(|v| v[i].sqrt()).sum::<f64>() / k as f64;
            let expected = root_mean * root_mean;
            assert!((fp.cov.get(i, i) - expected).abs() < 1e-8 * expected.max(1.0));
        }
    }
}

#[test]
fn scaling_inputs_scales_the_barycenter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let covs: Vec<_> = (0..6).map(|_| random_spd(4, &mut rng)).collect();
    let base = barycenter_cov_fixed_point(&covs, &FixedPointConfig::default()).unwrap();
    for c in [1e-3, 0.5, 40.0] {
        let scaled: Vec<_> = covs.iter().map(|s| s.scaled(c)).collect();
        let fp = barycenter_cov_fixed_point(&scaled, &FixedPointConfig::default()).unwrap();
        let gap = (fp.cov.as_matrix() - base.cov.as_matrix() * c).norm()
            / (c * base.cov.frobenius_norm());
        assert!(gap < 1e-8, "c={c}: relative gap {gap}");
        assert!(barycenter_residual(&fp.cov, &scaled).unwrap() < 1e-8 * fp.cov.trace());
    }
}

#[test]
fn iteration_budget_is_reported_not_raised() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let covs: Vec<_> = (0..4)
        .map(|_| random_spd(6, &mut rng).scaled(50.0))
        .collect();
    let cfg = FixedPointConfig {
        max_iter: 1,
        ..FixedPointConfig::default()
    };
    let fp = barycenter_cov_fixed_point(&covs, &cfg).unwrap();
    assert!(!fp.converged);
    assert_eq!(fp.iterations_used, 1);
}

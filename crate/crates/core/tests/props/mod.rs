//! Property checks shared by the `properties` and `acceptance` test targets.
//!
//! Each check runs a deterministic proptest runner and returns the first
//! counterexample as an error string.

#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use wasp_glm::barycenter::{
    barycenter, combine, moment_summaries, moment_summary, CombineMethod, FixedPointConfig,
};
use wasp_glm::draws::{indexed_names, DrawDiagnostics, DrawMatrix};
use wasp_glm::glm::Dataset;
use wasp_glm::io::{self, ExperimentConfig};
use wasp_glm::linalg::{bures_dist, gaussian_w2_sq, SymMatrix};
use wasp_glm::partition::partition;
use wasp_glm::samplers::{postprocess_chain, ChainConfig};

pub type Check = fn() -> Result<(), String>;

/// Every check with its name, in a stable order.
pub const ALL: [(&str, Check); 10] = [
    ("bures_axioms", bures_axioms),
    ("w2_rotation_invariance", w2_rotation_invariance),
    ("single_subset_identity", single_subset_identity),
    ("permutation_invariance", permutation_invariance),
    ("dpmc_exact_mean", dpmc_exact_mean),
    (
        "partition_disjoint_exhaustive",
        partition_disjoint_exhaustive,
    ),
    ("postprocess_arithmetic", postprocess_arithmetic),
    ("draws_csv_round_trip", draws_csv_round_trip),
    ("dataset_csv_round_trip", dataset_csv_round_trip),
    ("pipeline_determinism", pipeline_determinism),
];

fn run<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn lib<T>(r: wasp_glm::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// `B Bᵀ / d + 0.1 I` from `d²` entries.
pub fn spd_from(d: usize, vals: &[f64]) -> SymMatrix {
    let b = DMatrix::from_column_slice(d, d, &vals[..d * d]);
    let m = &b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1;
    SymMatrix::new(m).unwrap()
}

fn spd_strategy(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| spd_from(d, &v))
}

/// Principal square root by symmetric eigendecomposition, independent of the crate.
fn oracle_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let root = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&root) * e.eigenvectors.transpose()
}

/// `tr(A + B − 2 (A^{1/2} B A^{1/2})^{1/2})`.
fn oracle_bures_sq(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let ra = oracle_sqrt(a.as_matrix());
    let inner = &ra * b.as_matrix() * &ra;
    let inner = (&inner + inner.transpose()) / 2.0;
    a.trace() + b.trace() - 2.0 * oracle_sqrt(&inner).trace()
}

pub fn bures_axioms() -> Result<(), String> {
    let triple =
        (1usize..=5).prop_flat_map(|d| (spd_strategy(d), spd_strategy(d), spd_strategy(d)));
    run(1000, triple, |(a, b, c)| {
        let ab = lib(bures_dist(&a, &b))?;
        let ba = lib(bures_dist(&b, &a))?;
        let bc = lib(bures_dist(&b, &c))?;
        let ac = lib(bures_dist(&a, &c))?;
        let aa = lib(bures_dist(&a, &a))?;
        let scale = a.trace() + b.trace() + c.trace();
        ensure(ab >= 0.0 && aa <= 1e-7 * scale.sqrt(), || {
            format!("d(A,A) = {aa}, d(A,B) = {ab}")
        })?;
        ensure((ab - ba).abs() <= 1e-10 * (1.0 + ab), || {
            format!("asymmetric: {ab} vs {ba}")
        })?;
        ensure(ac <= ab + bc + 1e-10 * scale.sqrt(), || {
            format!("triangle: {ac} > {ab} + {bc}")
        })?;
        let oracle = oracle_bures_sq(&a, &b);
        ensure((ab * ab - oracle).abs() <= 1e-9 * scale, || {
            format!("d² = {} but trace formula gives {oracle}", ab * ab)
        })
    })
}

fn orthogonal(d: usize, vals: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_column_slice(d, d, &vals[..d * d]) + DMatrix::identity(d, d) * 1e-3;
    m.qr().q()
}

pub fn w2_rotation_invariance() -> Result<(), String> {
    let case = (1usize..=6).prop_flat_map(|d| {
        (
            spd_strategy(d),
            spd_strategy(d),
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-1.0f64..1.0, d * d),
            prop::collection::vec(-5.0f64..5.0, d),
        )
    });
    run(300, case, |(s1, s2, m1, m2, q, shift)| {
        let d = s1.dim();
        let q = orthogonal(d, &q);
        let (m1, m2, shift) = (
            DVector::from_vec(m1),
            DVector::from_vec(m2),
            DVector::from_vec(shift),
        );
        let base = lib(gaussian_w2_sq(&m1, &s1, &m2, &s2))?;
        let rot = |s: &SymMatrix| SymMatrix::new(&q * s.as_matrix() * q.transpose()).unwrap();
        let moved = lib(gaussian_w2_sq(
            &(&q * &m1 + &shift),
            &rot(&s1),
            &(&q * &m2 + &shift),
            &rot(&s2),
        ))?;
        ensure((base - moved).abs() <= 1e-9 * (1.0 + base), || {
            format!("{base} became {moved}")
        })
    })
}

fn draws_from(t: usize, d: usize, vals: &[f64]) -> DrawMatrix {
    DrawMatrix::new(
        DMatrix::from_column_slice(t, d, &vals[..t * d]),
        indexed_names("theta", d),
        DrawDiagnostics::default(),
    )
    .unwrap()
}

/// `k` subsets of `T × d` draws, each with its own location and spread.
fn subsets_strategy(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<DrawMatrix>> {
    (k, 1usize..=4, 10usize..=40).prop_flat_map(|(k, d, t)| {
        prop::collection::vec(
            (
                prop::collection::vec(-1.0f64..1.0, t * d),
                -2.0f64..2.0,
                0.5f64..3.0,
            ),
            k,
        )
        .prop_map(move |blocks| {
            blocks
                .into_iter()
                .map(|(v, loc, spread)| {
                    let v: Vec<f64> = v.iter().map(|x| loc + spread * x).collect();
                    draws_from(t, d, &v)
                })
                .collect()
        })
    })
}

pub fn single_subset_identity() -> Result<(), String> {
    run(200, subsets_strategy(1..=1), |subsets| {
        let scale = subsets[0].matrix().amax().max(1.0);
        for method in [CombineMethod::Wasp, CombineMethod::Dpmc] {
            let out = lib(combine(method, &subsets, &FixedPointConfig::default()))?;
            let diff = (out.draws.matrix() - subsets[0].matrix()).amax();
            ensure(diff <= 1e-8 * scale, || {
                format!("{method}: draws moved by {diff}")
            })?;
        }
        Ok(())
    })
}

pub fn permutation_invariance() -> Result<(), String> {
    let case = subsets_strategy(2..=5).prop_flat_map(|s| {
        let n = s.len();
        (Just(s), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    });
    run(100, case, |(subsets, order)| {
        let permuted: Vec<DrawMatrix> = order.iter().map(|&j| subsets[j].clone()).collect();
        let cfg = FixedPointConfig::default();
        let a = lib(barycenter(&lib(moment_summaries(&subsets))?, &cfg))?;
        let b = lib(barycenter(&lib(moment_summaries(&permuted))?, &cfg))?;
        let scale = a.cov.frobenius_norm().max(1.0);
        ensure((&a.mean - &b.mean).amax() <= 1e-10 * scale, || {
            "mean depends on order".into()
        })?;
        ensure(
            (a.cov.as_matrix() - b.cov.as_matrix()).amax() <= 1e-9 * scale,
            || "covariance depends on order".into(),
        )?;
        for method in [CombineMethod::Wasp, CombineMethod::Dpmc] {
            let x = lib(moment_summary(&lib(combine(method, &subsets, &cfg))?.draws))?;
            let y = lib(moment_summary(
                &lib(combine(method, &permuted, &cfg))?.draws,
            ))?;
            let gap = (x.cov.as_matrix() - y.cov.as_matrix()).amax() + (&x.mean - &y.mean).amax();
            ensure(gap <= 1e-9 * scale, || {
                format!("{method}: moments moved by {gap}")
            })?;
        }
        Ok(())
    })
}

pub fn dpmc_exact_mean() -> Result<(), String> {
    run(150, subsets_strategy(1..=6), |subsets| {
        let summaries = lib(moment_summaries(&subsets))?;
        let k = summaries.len() as f64;
        let avg = summaries
            .iter()
            .fold(DVector::zeros(summaries[0].dim()), |acc, s| acc + &s.mean)
            / k;
        let out = lib(combine(
            CombineMethod::Dpmc,
            &subsets,
            &FixedPointConfig::default(),
        ))?;
        let got = lib(moment_summary(&out.draws))?;
        let scale = avg.amax().max(1.0);
        ensure((&got.mean - &avg).amax() <= 1e-10 * scale, || {
            format!("combined mean {:?} vs average {:?}", got.mean, avg)
        })?;
        ensure((&out.mean - &avg).amax() <= 1e-12 * scale, || {
            "reported mean differs".into()
        })
    })
}

pub fn partition_disjoint_exhaustive() -> Result<(), String> {
    let case = (1usize..=100_000).prop_flat_map(|n| (Just(n), 1usize..=n.min(500), any::<u64>()));
    run(60, case, |(n, k, seed)| {
        let part = lib(partition(n, k, seed))?;
        ensure(part.n() == n && part.k() == k, || "wrong shape".into())?;
        let mut seen = vec![false; n];
        for j in 0..k {
            for &i in part.members(j) {
                ensure(!seen[i], || format!("sample {i} in two subsets"))?;
                seen[i] = true;
                ensure(part.assignments()[i] == j + 1, || {
                    "labels disagree with members".into()
                })?;
            }
            let m = part.members(j).len();
            ensure(part.power(j) == n as f64 / m as f64, || {
                "power is not n/m_j".into()
            })?;
        }
        ensure(seen.iter().all(|&s| s), || "some sample unassigned".into())?;
        let sizes = part.sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        ensure(hi - lo <= 1 && *lo >= 1, || {
            format!("sizes range {lo}..{hi}")
        })
    })
}

pub fn postprocess_arithmetic() -> Result<(), String> {
    let case = (2usize..400).prop_flat_map(|total| (Just(total), 0..total, 1usize..20));
    run(500, case, |(total, burn, thin)| {
        let Ok(cfg) = ChainConfig::new(total, burn, thin, 0) else {
            ensure((total - burn) / thin < 2, || {
                format!("rejected valid config {total}/{burn}/{thin}")
            })?;
            return Ok(());
        };
        let raw = draws_from(total, 1, &(1..=total).map(|i| i as f64).collect::<Vec<_>>());
        let kept = lib(postprocess_chain(&raw, &cfg))?;
        ensure(kept.n_draws() == (total - burn) / thin, || {
            "wrong retained count".into()
        })?;
        for t in 0..kept.n_draws() {
            let expected = (burn + (t + 1) * thin) as f64;
            ensure(kept.matrix()[(t, 0)] == expected, || {
                format!("row {t} is not iteration {expected}")
            })?;
        }
        Ok(())
    })
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
    ]
}

pub fn draws_csv_round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("draws.csv");
    let case = (2usize..30, 1usize..6)
        .prop_flat_map(|(t, d)| (Just((t, d)), prop::collection::vec(finite(), t * d)));
    run(200, case, |((t, d), vals)| {
        let draws = draws_from(t, d, &vals);
        lib(io::save_draws_csv(&draws, &path))?;
        let back = lib(io::load_draws_csv(&path))?;
        ensure(back.param_names() == draws.param_names(), || {
            "header changed".into()
        })?;
        let same = back
            .matrix()
            .iter()
            .zip(draws.matrix().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(
            same && back.matrix().shape() == draws.matrix().shape(),
            || "values changed".into(),
        )
    })
}

pub fn dataset_csv_round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("data.csv");
    let case = (1usize..30, 1usize..5, any::<bool>()).prop_flat_map(|(n, p, with_trials)| {
        (
            prop::collection::vec(finite(), n * p),
            prop::collection::vec(0u32..20, n),
            Just((n, p, with_trials)),
        )
    });
    run(200, case, |(xs, counts, (n, p, with_trials))| {
        let x = DMatrix::from_column_slice(n, p, &xs);
        let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let trials = with_trials.then(|| counts.iter().map(|&c| c + 1).collect());
        let data = lib(Dataset::new(y, x, trials))?;
        lib(io::save_dataset_csv(&data, &path))?;
        let back = lib(io::load_dataset_csv(&path))?;
        let same_x = back
            .x
            .iter()
            .zip(data.x.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(
            same_x && back.y == data.y && back.trials == data.trials,
            || "dataset changed".into(),
        )?;
        ensure(back.predictor_names == data.predictor_names, || {
            "names changed".into()
        })
    })
}

/// Columns of report.csv that do not depend on wall clocks.
fn stable_report(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(text
        .lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != 7 && *i != 8)
                .map(|(_, c)| c.to_string())
                .collect()
        })
        .collect())
}

fn draw_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).map_err(|e| e.to_string())?));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Two runs with one seed agree on every draw and every non-timing column,
/// whatever the worker count.
pub fn pipeline_determinism() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    let mut draws = Vec::new();
    for (run, workers) in [(1, 1), (2, 1), (3, 4)] {
        let cfg = ExperimentConfig {
            n: 400,
            p: 3,
            k: 4,
            workers,
            replications: 2,
            chain: ChainConfig::new(400, 200, 2, 17).unwrap(),
            output_dir: dir.path().join(format!("run{run}")),
            ..ExperimentConfig::default()
        };
        io::run_experiment(&cfg).map_err(|e| e.to_string())?;
        reports.push(stable_report(&cfg.output_dir.join("report.csv"))?);
        draws.push(draw_files(&cfg.output_dir.join("draws"))?);
    }
    if draws[0].is_empty() {
        return Err("no draw files written".into());
    }
    for i in 1..reports.len() {
        if reports[i] != reports[0] {
            return Err(format!("report of run {} differs from run 1", i + 1));
        }
        if draws[i] != draws[0] {
            return Err(format!("draws of run {} differ from run 1", i + 1));
        }
    }
    Ok(())
}

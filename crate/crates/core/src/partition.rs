//! Random equal-split partitions and the subset / full-data fitting runs.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::draws::DrawMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::glm::{Dataset, GlmSpec};
use crate::rng::{self, Stream};
use crate::samplers::{fit_posterior, ChainConfig};

/// Assignment of `n` samples to `k` disjoint subsets labelled `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: usize,
    assignments: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds from 1-based labels; every label in `1..=k` must occur.
    pub fn from_assignments(k: usize, assignments: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let mut members = vec![Vec::new(); k];
        for (i, &a) in assignments.iter().enumerate() {
            if a == 0 || a > k {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} assigned to subset {a}, expected 1..={k}"
                )));
            }
            members[a - 1].push(i);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("subset {} is empty", j + 1)));
        }
        Ok(Partition {
            k,
            assignments,
            members,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Sizes `m_1, …, m_k`.
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Sample indices of subset `j` (0-based), in increasing order.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    /// Likelihood power `n / m_j` of subset `j` (0-based).
    pub fn power(&self, j: usize) -> f64 {
        self.n() as f64 / self.members[j].len() as f64
    }
}

/// Uniformly random permutation of `0..n` cut into `k` contiguous blocks; the
/// first `n mod k` blocks get one extra sample.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed, Stream::Partition));
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut start = 0;
    for j in 0..k {
        let len = base + usize::from(j < extra);
        for &i in &perm[start..start + len] {
            assignments[i] = j + 1;
        }
        start += len;
    }
    Partition::from_assignments(k, assignments)
}

/// Wall clocks in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTiming {
    pub subset_wall_clocks: Vec<f64>,
    pub combine_wall_clock: f64,
    pub full_wall_clock: Option<f64>,
}

impl RunTiming {
    /// `max_j t_j + t_combine`: subsets modelled as running fully in parallel.
    pub fn dnc_parallel(&self) -> f64 {
        self.subset_wall_clocks.iter().copied().fold(0.0, f64::max) + self.combine_wall_clock
    }

    /// `Σ_j t_j + t_combine`: all subsets on one worker.
    pub fn dnc_sum(&self) -> f64 {
        self.subset_wall_clocks.iter().sum::<f64>() + self.combine_wall_clock
    }
}

/// Outcome of one subset fit.
pub type SubsetOutcome = Result<(DrawMatrix, f64)>;

/// Fits every subset on `workers` threads, keeping per-subset results.
///
/// Subset `j` (1-based) uses power `n/m_j` and seed `cfg.seed + j`.
pub fn run_subsets_each(
    data: &Dataset,
    part: &Partition,
    spec: &GlmSpec,
    cfg: &ChainConfig,
    workers: usize,
) -> Result<Vec<SubsetOutcome>> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    if part.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} samples, data has {}",
            part.n(),
            data.n()
        )));
    }
    cfg.validate()?;
    Ok(exec::map_with_workers(part.k(), workers, |j| {
        let start = Instant::now();
        let subset = data.subset(part.members(j));
        let spec_j = spec.with_power(part.power(j))?;
        let cfg_j = cfg.with_seed(cfg.seed.wrapping_add(j as u64 + 1));
        let draws = fit_posterior(&subset, &spec_j, &cfg_j)?;
        Ok((draws, start.elapsed().as_secs_f64()))
    }))
}

/// Fits every subset; fails as a whole if any subset fails.
pub fn run_subsets_parallel(
    data: &Dataset,
    part: &Partition,
    spec: &GlmSpec,
    cfg: &ChainConfig,
    workers: usize,
) -> Result<(Vec<DrawMatrix>, RunTiming)> {
    let outcomes = run_subsets_each(data, part, spec, cfg, workers)?;
    let failed: Vec<(usize, String)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(j, o)| o.as_ref().err().map(|e| (j + 1, e.to_string())))
        .collect();
    if !failed.is_empty() {
        let message = failed
            .iter()
            .map(|(j, e)| format!("subset {j}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::SubsetFailures {
            subsets: failed.into_iter().map(|(j, _)| j).collect(),
            message,
        });
    }
    let mut draws = Vec::with_capacity(outcomes.len());
    let mut timing = RunTiming::default();
    for (d, t) in outcomes.into_iter().flatten() {
        draws.push(d);
        timing.subset_wall_clocks.push(t);
    }
    Ok((draws, timing))
}

/// Full-data fit at power 1; returns the draws and the wall clock in seconds.
pub fn run_full(data: &Dataset, spec: &GlmSpec, cfg: &ChainConfig) -> Result<(DrawMatrix, f64)> {
    if spec.power != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "full-data fit needs power 1, got {}",
            spec.power
        )));
    }
    let start = Instant::now();
    let draws = fit_posterior(data, spec, cfg)?;
    Ok((draws, start.elapsed().as_secs_f64()))
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::ExperimentConfig;
use super::csv_io::{load_dataset_csv, save_draws_csv, write_text};
use crate::barycenter::{
    combine, moment_summaries, moment_summary, CombineMethod, CombinedPosterior,
};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};
use crate::glm::{
    param_blocks, param_names, simulate_linear, simulate_logistic, simulate_multinomial,
    simulate_negbin, Dataset, Family, GlmSpec, ParamLayout, PriorSpec,
};
use crate::metrics::{
    approximation_error, computational_gain, min_subset_eigenvalue, per_block_errors,
    EvalDiagnostics, EvalReport,
};
use crate::partition::{partition, run_full, run_subsets_each, run_subsets_parallel, RunTiming};

/// Seed spacing between replications; subset seeds `base + j` never collide
/// with the next replication's base.
pub const REPLICATION_STRIDE: u64 = 1 << 32;

/// Name of the marker file present while a run is unfinished or after it failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

pub const REPORT_HEADER: [&str; 12] = [
    "family",
    "n",
    "p",
    "k",
    "replication",
    "method",
    "approximation_error",
    "computational_gain_parallel",
    "computational_gain_sum",
    "barycenter_converged",
    "seed",
    "version",
];

/// `<crate version>+<git describe>` captured at build time.
pub fn version_string() -> &'static str {
    env!("WASP_GLM_VERSION")
}

/// One line of the report table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub replication: usize,
    pub method: CombineMethod,
    /// Number of subsets that entered the combination (`< k` only with partial runs).
    pub subsets_used: usize,
    pub seed: u64,
    pub eval: EvalReport,
}

impl ReportRow {
    fn record(&self) -> Vec<String> {
        let converged = match self.method {
            CombineMethod::Wasp => self.eval.diagnostics.barycenter_converged.to_string(),
            CombineMethod::Dpmc => "NA".into(),
        };
        vec![
            self.family.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.k.to_string(),
            self.replication.to_string(),
            self.method.to_string(),
            self.eval.approximation_error.to_string(),
            self.eval.computational_gain.to_string(),
            self.eval.computational_gain_sum.to_string(),
            converged,
            self.seed.to_string(),
            version_string().to_string(),
        ]
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ReportRow>,
    pub output_dir: PathBuf,
}

impl ExperimentOutcome {
    /// Mean approximation error of `method` over replications.
    pub fn mean_error(&self, method: CombineMethod) -> Option<f64> {
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.eval.approximation_error)
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Synthetic data for `family` with the simulator's fixed true parameters.
pub fn simulate_for(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    Ok(match cfg.family {
        Family::Linear => simulate_linear(cfg.n, cfg.p, cfg.sigma, seed)?.0,
        Family::LogisticBinomial => simulate_logistic(cfg.n, cfg.p, cfg.trials, seed)?.0,
        Family::NegativeBinomial => simulate_negbin(cfg.n, cfg.p, seed)?.0,
        Family::MultinomialLogistic => simulate_multinomial(cfg.n, cfg.p, cfg.categories, seed)?.0,
    })
}

/// Model specification at power 1 with the configured prior.
pub fn model_spec(cfg: &ExperimentConfig, data: &Dataset) -> Result<GlmSpec> {
    let layout = ParamLayout::for_data(cfg.family, data)?;
    let mut prior = PriorSpec::default_for(cfg.family, layout.n_beta);
    if cfg.family != Family::Linear {
        let dispersion = prior.negbin_dispersion;
        prior = PriorSpec::isotropic(layout.n_beta, cfg.prior_variance);
        if dispersion.is_some() {
            prior.negbin_dispersion = Some(crate::glm::DispersionPrior::HalfNormal {
                scale: cfg.dispersion_scale,
            });
        }
    }
    GlmSpec::new(cfg.family, prior, 1.0)
}

fn load_data(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => {
            let d = load_dataset_csv(path)?;
            if cfg.family == Family::MultinomialLogistic {
                let j = d.y.iter().copied().fold(0.0, f64::max) as usize;
                d.with_categories(j.max(2))
            } else {
                Ok(d)
            }
        }
        None => simulate_for(cfg, seed),
    }
}

/// Per-parameter blocks, or the family's natural grouping when it has one.
fn report_blocks(family: Family, data: &Dataset) -> Result<Vec<(String, Vec<usize>)>> {
    let grouped = param_blocks(family, data);
    if !grouped.is_empty() {
        return Ok(grouped);
    }
    Ok(param_names(family, data)?
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name, vec![i]))
        .collect())
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

struct Replication {
    rows: Vec<ReportRow>,
    skipped_subsets: Vec<usize>,
}

fn run_replication(cfg: &ExperimentConfig, r: usize) -> Result<Replication> {
    let seed = cfg
        .chain
        .seed
        .wrapping_add((r as u64 - 1).wrapping_mul(REPLICATION_STRIDE));
    let chain = cfg.chain.with_seed(seed);
    let data = load_data(cfg, seed)?;
    let spec = model_spec(cfg, &data)?;
    if cfg.k > data.n() {
        return Err(Error::Config(format!("k={} exceeds n={}", cfg.k, data.n())));
    }

    let (full_draws, t_full) = run_full(&data, &spec, &chain)?;
    let part = partition(data.n(), cfg.k, seed)?;
    let (subset_draws, mut timing, skipped) = if cfg.allow_partial {
        let mut kept = Vec::new();
        let mut timing = RunTiming::default();
        let mut skipped = Vec::new();
        for (j, outcome) in run_subsets_each(&data, &part, &spec, &chain, cfg.workers)?
            .into_iter()
            .enumerate()
        {
            match outcome {
                Ok((d, t)) => {
                    kept.push(d);
                    timing.subset_wall_clocks.push(t);
                }
                Err(e) => {
                    eprintln!(
                        "warning: replication {r}: subset {} failed and is left out: {e}",
                        j + 1
                    );
                    skipped.push(j + 1);
                }
            }
        }
        if kept.is_empty() {
            return Err(Error::SubsetFailures {
                subsets: skipped,
                message: "every subset failed".into(),
            });
        }
        (kept, timing, skipped)
    } else {
        let (d, t) = run_subsets_parallel(&data, &part, &spec, &chain, cfg.workers)?;
        (d, t, Vec::new())
    };
    timing.full_wall_clock = Some(t_full);

    let full = moment_summary(&full_draws)?;
    let min_eig = min_subset_eigenvalue(&moment_summaries(&subset_draws)?)?;
    let blocks = report_blocks(cfg.family, &data)?;
    let draw_dir = cfg.output_dir.join("draws").join(format!("rep{r}"));
    if cfg.save_draws {
        mkdir(&draw_dir)?;
        save_draws_csv(&full_draws, draw_dir.join("full.csv"))?;
        for (j, d) in subset_draws.iter().enumerate() {
            save_draws_csv(d, draw_dir.join(format!("subset_{}.csv", j + 1)))?;
        }
    }

    let mut rows = Vec::new();
    for &method in &cfg.combine_methods {
        let start = Instant::now();
        let combined: CombinedPosterior = combine(method, &subset_draws, &cfg.fixed_point)?;
        timing.combine_wall_clock = start.elapsed().as_secs_f64();
        let approx = moment_summary(&combined.draws)?;
        let t_floor = |t: f64| t.max(1e-9);
        let eval = EvalReport {
            approximation_error: approximation_error(&full, &approx)?,
            computational_gain: computational_gain(
                t_floor(t_full),
                t_floor(timing.dnc_parallel()),
            )?,
            computational_gain_sum: computational_gain(t_floor(t_full), t_floor(timing.dnc_sum()))?,
            per_block_errors: Some(per_block_errors(&full, &approx, &blocks)?),
            diagnostics: EvalDiagnostics {
                barycenter_converged: combined.barycenter.as_ref().is_none_or(|b| b.converged),
                min_subset_eigenvalue: min_eig,
            },
        };
        if cfg.save_draws {
            save_draws_csv(&combined.draws, draw_dir.join(format!("{method}.csv")))?;
        }
        rows.push(ReportRow {
            family: cfg.family,
            n: data.n(),
            p: data.p(),
            k: cfg.k,
            replication: r,
            method,
            subsets_used: subset_draws.len(),
            seed,
            eval,
        });
    }
    Ok(Replication {
        rows,
        skipped_subsets: skipped,
    })
}

fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(REPORT_HEADER)
        .map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row.record())
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_block_errors(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["replication", "method", "block", "approximation_error"])
        .map_err(|e| Error::csv(path, e))?;
    for row in rows {
        for (block, err) in row.eval.per_block_errors.iter().flatten() {
            w.write_record([
                row.replication.to_string(),
                row.method.to_string(),
                block.clone(),
                err.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn summary_text(
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    skipped: &[(usize, Vec<usize>)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "wasp-glm {}", version_string());
    let _ = writeln!(
        s,
        "family={} n={} p={} k={} workers={} replications={}",
        cfg.family, cfg.n, cfg.p, cfg.k, cfg.workers, cfg.replications
    );
    let _ = writeln!(
        s,
        "chain: total_iters={} burn_in={} thin={} retained={} base_seed={}",
        cfg.chain.total_iters,
        cfg.chain.burn_in,
        cfg.chain.thin,
        cfg.chain.retained(),
        cfg.chain.seed
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<6} {:<11} {:>14} {:>14} {:>14}  converged",
        "method", "replication", "error", "gain(max)", "gain(sum)"
    );
    for row in &outcome.rows {
        let _ = writeln!(
            s,
            "{:<6} {:<11} {:>14.6} {:>14.4} {:>14.4}  {}",
            row.method.to_string(),
            row.replication,
            row.eval.approximation_error,
            row.eval.computational_gain,
            row.eval.computational_gain_sum,
            match row.method {
                CombineMethod::Wasp => row.eval.diagnostics.barycenter_converged.to_string(),
                CombineMethod::Dpmc => "NA".into(),
            }
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Errors are listed per replication; the line below is their mean over replications."
    );
    for &m in &cfg.combine_methods {
        if let Some(mean) = outcome.mean_error(m) {
            let _ = writeln!(s, "mean approximation error ({m}): {mean:.6}");
        }
    }
    for (r, subsets) in skipped {
        let list = subsets
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            s,
            "replication {r}: PARTIAL combination, subsets {list} failed and were left out"
        );
    }
    s
}

/// Runs every replication and writes `report.csv`, `block_errors.csv`,
/// `summary.txt` and (optionally) the draw files under `cfg.output_dir`.
///
/// An `INCOMPLETE` file marks the directory until the run finishes; on failure
/// it is left in place with the error message.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    mkdir(out)?;
    let marker = out.join(INCOMPLETE_MARKER);
    write_text(&marker, "run in progress\n")?;

    let result = (|| {
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        for r in 1..=cfg.replications {
            let rep = run_replication(cfg, r)?;
            if !rep.skipped_subsets.is_empty() {
                skipped.push((r, rep.skipped_subsets));
            }
            rows.extend(rep.rows);
        }
        let outcome = ExperimentOutcome {
            rows,
            output_dir: out.clone(),
        };
        write_report(&out.join("report.csv"), &outcome.rows)?;
        write_block_errors(&out.join("block_errors.csv"), &outcome.rows)?;
        write_text(
            &out.join("summary.txt"),
            &summary_text(cfg, &outcome, &skipped),
        )?;
        Ok(outcome)
    })();

    match result {
        Ok(outcome) => {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            Ok(outcome)
        }
        Err(e) => {
            let _ = write_text(&marker, &format!("run failed: {e}\n"));
            Err(e)
        }
    }
}

/// Scores combined draws against full-data draws, overall and per block.
pub fn evaluate_draws(
    full: &DrawMatrix,
    combined: &DrawMatrix,
    blocks: &[(String, Vec<usize>)],
) -> Result<(f64, Vec<(String, f64)>)> {
    if full.param_names() != combined.param_names() {
        return Err(Error::DimensionMismatch(format!(
            "full-data draws have parameters [{}], combined draws [{}]",
            full.param_names().join(","),
            combined.param_names().join(",")
        )));
    }
    let a = moment_summary(full)?;
    let b = moment_summary(combined)?;
    let per_block = per_block_errors(&a, &b, blocks)?.into_iter().collect();
    Ok((approximation_error(&a, &b)?, per_block))
}

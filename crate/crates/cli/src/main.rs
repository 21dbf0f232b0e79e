mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{
    ChainArgs, Cli, CombineArgs, Command, EvaluateArgs, FitDncArgs, FitFullArgs, ModelArgs,
    RunArgs, SimulateArgs,
};
use wasp_glm::barycenter::{combine, CombineMethod};
use wasp_glm::error::{Error, ErrorCategory, Result};
use wasp_glm::glm::{Dataset, Family, GlmSpec};
use wasp_glm::io::{self, ExperimentConfig};
use wasp_glm::metrics::computational_gain;
use wasp_glm::partition::{partition, run_full, run_subsets_each, run_subsets_parallel};
use wasp_glm::samplers::ChainConfig;

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Validation => 1,
        ErrorCategory::Numerical => 2,
        ErrorCategory::Io => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::FitFull(a) => fit_full(a),
        Command::FitDnc(a) => fit_dnc(a),
        Command::Combine(a) => combine_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}

fn chain_config(a: &ChainArgs) -> Result<ChainConfig> {
    ChainConfig::new(a.total_iters, a.burn_in, a.thin, a.seed)
}

/// Loads the dataset and builds the power-1 model for it.
fn load_model(data: &Path, m: &ModelArgs) -> Result<(Dataset, GlmSpec)> {
    let family: Family = m.family.parse()?;
    let mut d = io::load_dataset_csv(data)?;
    if family == Family::MultinomialLogistic {
        let j = match m.categories {
            Some(j) => j,
            None => d.y.iter().copied().fold(0.0, f64::max) as usize,
        };
        d = d.with_categories(j)?;
    }
    let cfg = ExperimentConfig {
        family,
        prior_variance: m.prior_variance,
        dispersion_scale: m.dispersion_scale,
        ..ExperimentConfig::default()
    };
    let spec = io::model_spec(&cfg, &d)?;
    Ok((d, spec))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        family: a.family.parse()?,
        n: a.n,
        p: a.p,
        trials: a.trials,
        sigma: a.sigma,
        categories: a.categories,
        ..ExperimentConfig::default()
    };
    let data = io::simulate_for(&cfg, a.seed)?;
    io::save_dataset_csv(&data, &a.out)?;
    eprintln!("wrote {} rows to {}", data.n(), a.out.display());
    Ok(())
}

fn fit_full(a: FitFullArgs) -> Result<()> {
    let (data, spec) = load_model(&a.data, &a.model)?;
    let (draws, secs) = run_full(&data, &spec, &chain_config(&a.chain)?)?;
    io::save_draws_csv(&draws, &a.out)?;
    println!("wall_clock_seconds={secs}");
    if let Some(rate) = draws.diagnostics().acceptance_rate {
        println!("acceptance_rate={rate}");
    }
    Ok(())
}

fn fit_dnc(a: FitDncArgs) -> Result<()> {
    let (data, spec) = load_model(&a.data, &a.model)?;
    let chain = chain_config(&a.chain)?;
    let part = partition(data.n(), a.k, chain.seed)?;
    mkdir(&a.out_dir)?;

    let assignments: String = std::iter::once("row,subset".to_string())
        .chain(
            part.assignments()
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{},{s}", i + 1)),
        )
        .collect::<Vec<_>>()
        .join("\n");
    write_file(&a.out_dir.join("partition.csv"), &(assignments + "\n"))?;

    let mut timing = String::from("subset,size,power,wall_clock_seconds\n");
    let mut failed = Vec::new();
    let outcomes: Vec<Result<_>> = if a.allow_partial {
        run_subsets_each(&data, &part, &spec, &chain, a.workers)?
    } else {
        let (draws, t) = run_subsets_parallel(&data, &part, &spec, &chain, a.workers)?;
        draws
            .into_iter()
            .zip(t.subset_wall_clocks)
            .map(Ok)
            .collect()
    };
    for (j, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((draws, secs)) => {
                io::save_draws_csv(&draws, a.out_dir.join(format!("subset_{}.csv", j + 1)))?;
                timing.push_str(&format!(
                    "{},{},{},{secs}\n",
                    j + 1,
                    part.sizes()[j],
                    part.power(j)
                ));
            }
            Err(e) => {
                eprintln!("warning: subset {} failed: {e}", j + 1);
                failed.push(j + 1);
            }
        }
    }
    write_file(&a.out_dir.join("timing.csv"), &timing)?;
    if !failed.is_empty() {
        let list = failed
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write_file(
            &a.out_dir.join("PARTIAL"),
            &format!("failed subsets: {list}\n"),
        )?;
        eprintln!("PARTIAL: subsets {list} failed; combining the rest changes the target");
    }
    Ok(())
}

fn subset_files(a: &CombineArgs) -> Result<Vec<PathBuf>> {
    let Some(dir) = &a.subset_dir else {
        return Ok(a.subsets.clone());
    };
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut files: Vec<(usize, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let stem = p
                .file_stem()?
                .to_str()?
                .strip_prefix("subset_")?
                .parse()
                .ok()?;
            (p.extension()? == "csv").then_some((stem, p))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no subset_<j>.csv files in {}",
            dir.display()
        )));
    }
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

fn combine_cmd(a: CombineArgs) -> Result<()> {
    let method: CombineMethod = a.method.parse()?;
    let files = subset_files(&a)?;
    let first = io::load_draws_csv(&files[0])?;
    let mut draws = vec![first];
    for f in &files[1..] {
        draws.push(io::load_draws_csv_expecting(f, draws[0].param_names())?);
    }
    let start = Instant::now();
    let combined = combine(method, &draws, &Default::default())?;
    let secs = start.elapsed().as_secs_f64();
    io::save_draws_csv(&combined.draws, &a.out)?;
    println!("combine_wall_clock_seconds={secs}");
    if let Some(b) = &combined.barycenter {
        println!("barycenter_converged={}", b.converged);
        println!("barycenter_iterations={}", b.iterations_used);
        if !b.converged {
            eprintln!(
                "warning: barycenter fixed point stopped at {} iterations without converging",
                b.iterations_used
            );
        }
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let full = io::load_draws_csv(&a.full)?;
    let combined = io::load_draws_csv_expecting(&a.combined, full.param_names())?;
    let blocks: Vec<(String, Vec<usize>)> = full
        .param_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), vec![i]))
        .collect();
    let (err, per_block) = io::evaluate_draws(&full, &combined, &blocks)?;
    println!("approximation_error={err}");
    for (name, e) in per_block {
        println!("approximation_error[{name}]={e}");
    }
    if let (Some(t_full), Some(t_dnc)) = (a.t_full, a.t_dnc) {
        println!("computational_gain={}", computational_gain(t_full, t_dnc)?);
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env();
    if let Some(f) = &a.family {
        cfg.family = f.parse()?;
    }
    macro_rules! set {
        ($($src:expr => $dst:expr),* $(,)?) => {
            $(if let Some(v) = $src { $dst = v; })*
        };
    }
    set! {
        a.n => cfg.n,
        a.p => cfg.p,
        a.k => cfg.k,
        a.workers => cfg.workers,
        a.replications => cfg.replications,
        a.seed => cfg.chain.seed,
        a.total_iters => cfg.chain.total_iters,
        a.burn_in => cfg.chain.burn_in,
        a.thin => cfg.chain.thin,
        a.output_dir => cfg.output_dir,
    }
    if let Some(d) = a.data {
        cfg.data = Some(d);
    }
    if let Some(methods) = &a.methods {
        cfg.combine_methods = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    cfg.save_draws &= !a.no_draws;
    cfg.allow_partial |= a.allow_partial;

    let outcome = io::run_experiment(&cfg)?;
    for &m in &cfg.combine_methods {
        if let Some(mean) = outcome.mean_error(m) {
            println!("mean_approximation_error[{m}]={mean}");
        }
    }
    println!("report={}", outcome.output_dir.join("report.csv").display());
    Ok(())
}

//! `symbed`: runs the similarity and classification evaluations from a
//! config file and writes a self-contained run directory.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 when at least one
//! model failed while the others completed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use symbed_core::config::RunConfig;
use symbed_core::corpus::{corpus_summary, proposition_summary};
use symbed_core::embed::BackendRegistry;
use symbed_core::report::{write_run_directory, EvaluationBundle};
use symbed_core::runner::{self, PhaseOutcome};
use symbed_core::Error;

/// Network phases never run more than this many requests at once.
const NETWORK_JOBS_CAP: usize = 4;

#[derive(Debug, Parser)]
#[command(
    name = "symbed",
    version,
    about = "Evaluate how embedding models handle symbolic expressions"
)]
struct Cli {
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Serve remote models from the embedding cache only; never touch the network.
    #[arg(long, global = true)]
    offline: bool,

    /// Worker threads (default: logical cores; network phases use at most 4).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    /// Output directory for run directories, overriding `out_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for every shuffle, overriding `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the corpus and propositions and print their summaries.
    Validate,
    /// Fill the embedding cache for every model and input text.
    Embed,
    /// Similarity analysis: cosine rows, ROC/AUC and signed-rank tests.
    Simeval,
    /// SVM classification with nested cross-validation; appends to the latest
    /// run directory of the same config, or starts a new one.
    Mlbench,
    /// Re-render tables and figures from an existing bundle.json.
    Report {
        /// Run directory; defaults to the latest run of the config.
        run_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(jobs))
            .build_global()
        {
            error!("cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}

fn exit_for(outcome: &PhaseOutcome) -> ExitCode {
    if outcome.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        error!("models failed: {}", outcome.failed.join(", "));
        ExitCode::from(2)
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| cfg.out_path())
}

/// Copy of `cfg` for execution: network concurrency capped by --jobs.
fn execution_config(cli: &Cli, cfg: &RunConfig) -> RunConfig {
    let mut exec = cfg.clone();
    if let Some(jobs) = cli.jobs {
        let cap = usize::from(jobs).min(NETWORK_JOBS_CAP);
        for m in &mut exec.models {
            m.concurrency = Some(m.concurrency().min(cap));
        }
    }
    exec
}

fn hash_tag(cfg: &RunConfig) -> String {
    cfg.config_hash()[..12].to_string()
}

/// Most recent run directory of this config under `out`, by name.
fn latest_run(out: &Path, cfg: &RunConfig) -> Option<PathBuf> {
    let suffix = format!("-{}", hash_tag(cfg));
    let mut runs: Vec<PathBuf> = fs::read_dir(out)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(&suffix))
                && p.join("bundle.json").is_file()
        })
        .collect();
    runs.sort();
    runs.pop()
}

fn new_run_dir(out: &Path, cfg: &RunConfig) -> Result<PathBuf, Error> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-{}", hash_tag(cfg));
    let mut dir = out.join(&base);
    let mut n = 1;
    while dir.exists() {
        n += 1;
        dir = out.join(format!("{stamp}.{n}-{}", hash_tag(cfg)));
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    if let Command::Report { run_dir: Some(dir) } = &cli.command {
        return rerender(dir);
    }
    let cfg = load_config(cli)?;
    let registry = BackendRegistry::with_builtin().offline(cli.offline);
    match &cli.command {
        Command::Validate => validate(&cfg),
        Command::Embed => {
            let mut cache = runner::open_cache(&cfg)?;
            let outcome = runner::warm_cache(&execution_config(cli, &cfg), &registry, &mut cache)?;
            Ok(exit_for(&outcome))
        }
        Command::Simeval => {
            let mut cache = runner::open_cache(&cfg)?;
            let mut bundle = runner::new_bundle(&cfg);
            let outcome = runner::run_simeval(
                &execution_config(cli, &cfg),
                &registry,
                &mut cache,
                &mut bundle,
            )?;
            let dir = new_run_dir(&out_dir(cli, &cfg), &cfg)?;
            write_run_directory(&dir, &bundle)?;
            println!("{}", dir.display());
            Ok(exit_for(&outcome))
        }
        Command::Mlbench => {
            // fail on a missing propositions path before touching the run directory
            runner::load_run_propositions(&cfg)?;
            let out = out_dir(cli, &cfg);
            let (dir, mut bundle) = match latest_run(&out, &cfg) {
                Some(dir) => {
                    let bundle = EvaluationBundle::load(&dir.join("bundle.json"))?;
                    info!("appending to {}", dir.display());
                    (dir, bundle)
                }
                None => (new_run_dir(&out, &cfg)?, runner::new_bundle(&cfg)),
            };
            let mut cache = runner::open_cache(&cfg)?;
            let outcome = runner::run_mlbench(
                &execution_config(cli, &cfg),
                &registry,
                &mut cache,
                &mut bundle,
            )?;
            write_run_directory(&dir, &bundle)?;
            println!("{}", dir.display());
            Ok(exit_for(&outcome))
        }
        Command::Report { run_dir: None } => {
            let out = out_dir(cli, &cfg);
            let dir = latest_run(&out, &cfg).ok_or_else(|| {
                Error::InvalidInput(format!("no run of this config under {}", out.display()))
            })?;
            rerender(&dir)
        }
        Command::Report { run_dir: Some(_) } => unreachable!("handled above"),
    }
}

fn validate(cfg: &RunConfig) -> Result<ExitCode, Error> {
    let corpus = runner::load_run_corpus(cfg)?;
    println!("corpus: {}", corpus_summary(&corpus));
    if cfg.propositions.is_some() {
        let props = runner::load_run_propositions(cfg)?;
        println!("{}", proposition_summary(&props));
    }
    println!(
        "models: {}",
        cfg.models
            .iter()
            .map(|m| m.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

fn rerender(dir: &Path) -> Result<ExitCode, Error> {
    let bundle = EvaluationBundle::load(&dir.join("bundle.json"))?;
    write_run_directory(dir, &bundle)?;
    println!("{}", dir.display());
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse_anywhere() {
        let cli = Cli::try_parse_from([
            "symbed",
            "simeval",
            "--config",
            "c.toml",
            "--offline",
            "--jobs",
            "2",
        ])
        .unwrap();
        assert!(cli.offline);
        assert_eq!(cli.jobs, Some(2));
        assert!(Cli::try_parse_from(["symbed", "simeval", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["symbed", "simeval", "--jobs", "0"]).is_err());
    }
}

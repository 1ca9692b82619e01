use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use fracrep::pipeline::{load_config, run_pipeline, PipelineOptions, Stage};

/// Fractional hot-deck imputation with replication variance estimation.
///
/// Reads a TOML run configuration, executes the pipeline up to the
/// requested stage, and leaves artifacts in the configured output
/// directory. The estimate stage ends with reports.csv and report.txt.
#[derive(Debug, Parser)]
#[command(name = "fracrep", version, about)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, short = 'c')]
    config: PathBuf,

    /// Run through this stage: impute, replicate, rake, estimate, or all.
    #[arg(long, default_value = "all", value_parser = parse_stage)]
    stage: Stage,

    /// Worker threads for scenario studies (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Replace the synthetic scenario's seed (ignored for file input).
    #[arg(long)]
    seed_override: Option<u64>,

    /// Cache raked replicate weight columns under the output directory.
    #[arg(long)]
    dump_replicates: bool,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fracrep: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building the worker pool")?;
    }
    let config = load_config(&cli.config)?;
    let options = PipelineOptions {
        stage: Some(cli.stage),
        dump_replicates: cli.dump_replicates,
        seed_override: cli.seed_override,
    };
    let outcome = run_pipeline(&config, &options)?;

    println!(
        "processed {} records, {} replicates",
        outcome.records, outcome.replicates
    );
    if let Some(status) = &outcome.production_rake {
        println!(
            "raking: converged={} cycles={} max_rel_error={:.3e}",
            status.converged, status.cycles, status.max_rel_error
        );
        if !status.converged {
            anyhow::bail!(
                "raking did not converge within the cycle budget (max_rel_error {:.3e})",
                status.max_rel_error
            );
        }
    }
    for report in &outcome.reports {
        match report.std_se_ratio() {
            Some(ratio) => println!(
                "{}: estimate {:.3}, adjusted se {:.3}, naive se {:.3}, std se {ratio}",
                report.name, report.estimate, report.adjusted_se, report.naive_se
            ),
            None => println!(
                "{}: estimate {:.3}, adjusted se {:.3}, naive se {:.3}",
                report.name, report.estimate, report.adjusted_se, report.naive_se
            ),
        }
    }
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

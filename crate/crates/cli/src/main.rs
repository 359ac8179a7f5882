use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcurriculum_cli::commands::{cmd_dla, cmd_generate, cmd_report, cmd_scan, cmd_train, cmd_verify_props, render_table};
use qcurriculum_cli::{CliResult, Context, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "qcurriculum", version, about = "Curriculum-ordered QCNN phase classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base training seed; run r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Test set size, e.g. 200 for quick runs.
    #[arg(long, global = true)]
    test_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load from cache) the train and test datasets.
    Generate,
    /// Train every configured strategy for every run.
    Train,
    /// Build or load the Lie closure of the generator set.
    Dla,
    /// Class probabilities along a cut through the phase diagram.
    Scan,
    /// Empirical checks of the gradient-magnitude and variance propositions.
    VerifyProps,
    /// Check metrics against the summary and print the results table.
    Report,
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let overrides =
        Overrides { seed: cli.seed, jobs: cli.jobs, out: cli.out, cache: cli.cache, test_size: cli.test_size };
    let ctx = Context::new(cfg.resolve(&overrides)?)?;
    ctx.log(&format!("config_hash={}", ctx.hash));
    match cli.command {
        Command::Generate => {
            let s = cmd_generate(&ctx)?;
            println!("test set: {} examples; train sets: {:?}; class counts: {:?}", s.test, s.train, s.class_counts);
        }
        Command::Train => print!("{}", render_table(&cmd_train(&ctx)?)),
        Command::Dla => {
            let r = cmd_dla(&ctx)?;
            println!(
                "dim {} (n = {}, {} generators, orthonormality residual {:.2e}, cached: {})",
                r.dim,
                r.n,
                r.generators.len(),
                r.orthonormality_residual,
                r.cached
            );
        }
        Command::Scan => {
            let rows = cmd_scan(&ctx)?;
            println!("{} points written to {}", rows.len(), ctx.out("scan.csv").display());
        }
        Command::VerifyProps => {
            let (p1, p2) = cmd_verify_props(&ctx)?;
            println!("G non-increasing: {}", p1.report.g_non_increasing);
            for r in &p1.report.rows {
                println!("fraction {:.2}: subset/full = {:.6} holds={}", r.fraction, r.ratio, r.holds);
            }
            let p2 = &p2.report;
            println!(
                "surrogate risk: curriculum {:.5} ± {:.5}, random {:.5} ± {:.5}; premise held on {}/{} seeds",
                p2.mean_risk_curriculum,
                p2.sem_risk_curriculum,
                p2.mean_risk_random,
                p2.sem_risk_random,
                p2.premise_seeds,
                p2.seeds.len()
            );
        }
        Command::Report => print!("{}", cmd_report(&ctx)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

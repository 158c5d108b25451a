//! Command-line driver: `econobench collect | analyze | report`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use econobench::config::{parse_game_list, Overrides, RunConfig};
use econobench::pipeline::{run_analyze, run_collect, PairOutcome};
use econobench::report::run_report;

#[derive(Parser)]
#[command(
    name = "econobench",
    version,
    about = "Benchmark chat agents in behavioral economics games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect behavior samples for every configured (agent, game) pair.
    /// Completed pairs are skipped, so an interrupted session resumes.
    Collect(CommonArgs),
    /// Run all analyses against the human baseline and write the CSV report
    /// bundle under `<session>/reports/`.
    Analyze(AnalyzeArgs),
    /// Render the report bundle as markdown (written to
    /// `<session>/reports/report.md` and printed to stdout).
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the session directory.
    #[arg(long)]
    session: Option<PathBuf>,
    /// Comma-separated subset of games (snake_case ids).
    #[arg(long, value_delimiter = ',')]
    games: Option<Vec<String>>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the human baseline path.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Override the number of valid samples per (agent, game).
    #[arg(long = "n-valid")]
    n_valid: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also emit SVG bar charts next to the histogram CSVs.
    #[arg(long)]
    charts: bool,
}

impl CommonArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        let games = match &self.games {
            Some(keys) => Some(parse_game_list(keys)?),
            None => None,
        };
        config.apply(Overrides {
            session_dir: self.session.clone(),
            baseline: self.baseline.clone(),
            seed: self.seed,
            n_valid: self.n_valid,
            games,
        });
        Ok(config)
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Collect(args) => {
            let config = args.load()?;
            let summary = run_collect(&config, |line| eprintln!("{line}"))?;
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            let failed = summary.failures().count();
            let done = summary
                .pairs
                .iter()
                .filter(|p| !matches!(p.outcome, PairOutcome::Failed(_)))
                .count();
            eprintln!("collect: {done} pairs ready, {failed} failed");
            if failed > 0 {
                eprintln!("the session is partial; re-run collect to resume");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze(args) => {
            let mut config = args.common.load()?;
            config.charts |= args.charts;
            let summary = run_analyze(&config, |line| eprintln!("analyze: {line}"))?;
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            eprintln!(
                "analyze: wrote {} files under {}",
                summary.files.len(),
                config.session_dir.join("reports").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let config = args.load()?;
            let text = run_report(&config)?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

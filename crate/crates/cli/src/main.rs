//! `reporteval` — evaluate machine-generated research reports for quality,
//! redundancy, and factuality with a pluggable LLM judge.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "reporteval",
    version,
    about = "Score research reports on quality, redundancy, and factuality with an LLM judge",
    after_help = "Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error."
)]
struct Cli {
    /// TOML configuration file (default: ./reporteval.toml when present).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a directory of reports end to end; resumable per report.
    Eval(EvalArgs),
    /// Report-length / pair-count / claim-pair statistics for a run.
    Stats(StatsArgs),
    /// Compare finished runs side by side (best and second-best marked).
    Compare(CompareArgs),
    /// LLM–human alignment: per-dimension MAD and ranking agreement.
    Align(AlignArgs),
    /// Classify queries into the twelve fixed categories.
    Classify(ClassifyArgs),
    /// Warm the source cache from report citations or explicit URLs.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// System name the reports came from (labels the run).
    #[arg(long)]
    system: String,
    /// Directory of report files named `<query-id>.md` (or `paths.reports`
    /// from the config file).
    #[arg(long, value_name = "DIR")]
    reports: Option<PathBuf>,
    /// Query set file, `id<TAB>category<TAB>text` with header line (or
    /// `paths.queries` from the config file).
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,
    /// Run identifier; defaults to `r-<config-hash>`.
    #[arg(long)]
    run_id: Option<String>,
    /// Base directory for run output (default `runs/`).
    #[arg(long, value_name = "DIR")]
    runs: Option<PathBuf>,
    /// Mock judge script (`prompt_hash<TAB>response_file`); no network.
    #[arg(long, value_name = "FILE")]
    mock: Option<PathBuf>,
    /// Source cache directory (default `cache/`).
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    /// Require 100% source-cache hits; fail fast on any miss.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Paragraph-pair cap per report.
    #[arg(long)]
    cap: Option<usize>,
    /// Cost-control budget on claim-source pairs per report.
    #[arg(long)]
    claim_pair_budget: Option<usize>,
    /// Stop after N newly evaluated reports (checkpointing aid).
    #[arg(long)]
    stop_after: Option<usize>,
    /// Override the quality prompt template.
    #[arg(long, value_name = "FILE")]
    template_quality: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    template_redundancy: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    template_factuality: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    template_category: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Run directory (runs/<system>/<run-id>).
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Emit line-delimited JSON instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Two or more run directories over the same query set.
    #[arg(long, value_name = "DIR", num_args = 2.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AlignArgs {
    /// Run directory holding the model scores.
    #[arg(long, value_name = "DIR")]
    run: PathBuf,
    /// Human score CSV (`report_id,dimension,expert1,...`).
    #[arg(long, value_name = "FILE")]
    human: PathBuf,
    /// Human ranking file (`query_id<TAB>id,id,id` best first).
    #[arg(long, value_name = "FILE")]
    rankings: Option<PathBuf>,
    /// Append-only alignment journal (JSONL).
    #[arg(long, value_name = "FILE")]
    journal: Option<PathBuf>,
    /// Earlier journaled run id to diff against.
    #[arg(long)]
    baseline: Option<String>,
    /// Identifier for this alignment run (default: the run id).
    #[arg(long)]
    alignment_id: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    queries: PathBuf,
    /// Mock judge script; no network.
    #[arg(long, value_name = "FILE")]
    mock: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    template_category: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FetchArgs {
    /// Source cache directory.
    #[arg(long, value_name = "DIR")]
    cache: PathBuf,
    /// Extract and fetch every citation target in these reports.
    #[arg(long, value_name = "DIR")]
    reports: Option<PathBuf>,
    /// Explicit URLs to fetch.
    #[arg(long = "url", value_name = "URL")]
    urls: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let file_config = config::FileConfig::load(cli.config.as_deref())?;
        match cli.command {
            Command::Eval(args) => commands::eval(&file_config, args),
            Command::Stats(args) => commands::stats(args),
            Command::Compare(args) => commands::compare(args),
            Command::Align(args) => commands::align(args),
            Command::Classify(args) => commands::classify(&file_config, args),
            Command::Fetch(args) => commands::fetch(&file_config, args),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(config::exit_code_for(&err))
        }
    }
}

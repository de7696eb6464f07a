mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taxonomist_core::ingest::CorpusFormat;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_INTEGRITY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "taxonomist", version, about = "Build human-curated taxonomies over short text descriptors")]
pub struct Cli {
    /// Artifact store directory.
    #[arg(long, global = true, default_value = "store")]
    store: PathBuf,
    /// Seed for index construction.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for precompute and serving.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a raw descriptor file into the corpus artifact.
    Ingest(IngestArgs),
    /// Compute every grid cell, cluster it and build per-model indexes.
    Precompute(PrecomputeArgs),
    /// Serve the HTTP API over the store.
    Serve(ServeArgs),
    /// Write the taxonomy document.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// jsonl or csv; inferred from the file extension when omitted.
    #[arg(long)]
    format: Option<CorpusFormat>,
    /// Stopword list as LANG=PATH; repeatable.
    #[arg(long = "stopwords", value_parser = parse_lang_path)]
    stopwords: Vec<(String, PathBuf)>,
    /// Place-name list, one per line.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    min_count: u64,
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    /// JSON grid config: model_ids, specs, cluster_params and the model catalog.
    #[arg(long)]
    grid_config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_lang_path(s: &str) -> Result<(String, PathBuf), String> {
    let (lang, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LANG=PATH, got '{s}'"))?;
    if lang.is_empty() || path.is_empty() {
        return Err(format!("expected LANG=PATH, got '{s}'"));
    }
    Ok((lang.to_string(), PathBuf::from(path)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if cli.workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}

/// The error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Ingest(args) => commands::ingest(cli, args),
        Command::Precompute(args) => commands::precompute(cli, args),
        Command::Serve(args) => commands::serve(cli, args),
        Command::Export(args) => commands::export(cli, args),
    }
}

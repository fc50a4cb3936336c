//! `webslr`: run review stages against a work directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use webslr::pipeline::{EntryStatus, Pipeline, PipelineError, RunOptions, Stage};
use webslr::protocol::{load_protocol, ProtocolError};
use webslr::Exec;

#[derive(Parser)]
#[command(name = "webslr", version, about = "Protocol-driven web content review pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol's queries and score them against the QGS.
    Search(StageArgs),
    /// Fetch (or replay) the retrieved pages into the corpus store.
    Fetch(StageArgs),
    /// Score relevance and build the document-term matrix.
    Select(StageArgs),
    /// Fit the seeded topic model and build the evidence table.
    Extract(StageArgs),
    /// Group each column's segments into themes.
    Synthesize(StageArgs),
    /// Mine cross-column association rules.
    Mine(StageArgs),
    /// Write the Markdown and JSON report.
    Report(StageArgs),
    /// Run every stage in order.
    RunAll(StageArgs),
    /// Check a protocol file and print its diagnostics.
    Validate {
        #[arg(long)]
        protocol: PathBuf,
    },
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    workdir: PathBuf,
    /// Rerun even when inputs are unchanged, and accept edited upstream artifacts.
    #[arg(long)]
    force: bool,
    /// Use only fixture engines, snapshots and the existing corpus store.
    #[arg(long)]
    offline: bool,
    /// Disable data-parallel loops.
    #[arg(long)]
    sequential: bool,
}

fn run_stages(args: &StageArgs, stages: &[Stage]) -> Result<(), PipelineError> {
    let options = RunOptions {
        force: args.force,
        offline: args.offline,
        exec: if args.sequential { Exec::Sequential } else { Exec::default() },
    };
    let mut pipeline = Pipeline::open(&args.protocol, &args.workdir, options)?;
    let mut out = std::io::stdout().lock();
    for &stage in stages {
        let report = pipeline.run_stage(stage)?;
        let status = match report.status {
            EntryStatus::Ok => "ok",
            EntryStatus::UpToDate => "up-to-date",
            EntryStatus::Failed => "failed",
        };
        let _ = writeln!(out, "{stage}: {status}");
        for note in &report.notes {
            let _ = writeln!(out, "  {note}");
        }
    }
    Ok(())
}

fn validate(path: &Path) -> ExitCode {
    match load_protocol(path) {
        Ok((p, _)) => {
            println!("{}: valid ({} attributes, {} queries)", path.display(), p.schema.len(), p.search.query_strings.len());
            ExitCode::SUCCESS
        }
        Err(ProtocolError::Semantic(diags)) => {
            for d in diags {
                eprintln!("{}: {d}", path.display());
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (args, stages): (&StageArgs, Vec<Stage>) = match &cli.command {
        Command::Search(a) => (a, vec![Stage::Search]),
        Command::Fetch(a) => (a, vec![Stage::Fetch]),
        Command::Select(a) => (a, vec![Stage::Select]),
        Command::Extract(a) => (a, vec![Stage::Extract]),
        Command::Synthesize(a) => (a, vec![Stage::Synthesize]),
        Command::Mine(a) => (a, vec![Stage::Mine]),
        Command::Report(a) => (a, vec![Stage::Report]),
        Command::RunAll(a) => (a, Stage::ALL.to_vec()),
        Command::Validate { protocol } => return validate(protocol),
    };
    match run_stages(args, &stages) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

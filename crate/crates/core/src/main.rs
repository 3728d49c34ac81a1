use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ham::grammar::load_grammar;
use ham::harness::{run_sequence, HarnessError, ReportFormat, ReportWriter};
use ham::problems::load_sequence;
use ham::search::SearchConfig;

#[derive(Parser)]
#[command(name = "ham", about = "Incremental program search with a grammar-based memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a training sequence and report one row per problem.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long)]
    grammar: PathBuf,
    /// Search every problem with the initial grammar.
    #[arg(long)]
    no_update: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[arg(long, default_value_t = 1_000_000)]
    initial_limit: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    quantum: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..64))]
    max_phases: u32,
    /// Memory state file, resumed if present and rewritten after each problem.
    #[arg(long)]
    ham: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    report: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    if args.initial_limit < args.quantum {
        return Err("--initial-limit must be at least --quantum".into());
    }
    let seq = load_sequence(&read(&args.seq)?).map_err(|e| format!("{}: {e}", args.seq.display()))?;
    let scfg = load_grammar(&read(&args.grammar)?).map_err(|e| format!("{}: {e}", args.grammar.display()))?;
    let config = SearchConfig {
        initial_limit: args.initial_limit,
        quantum: args.quantum,
        max_phases: args.max_phases,
        workers: args.workers as usize,
        start: None,
    };
    let updates = !args.no_update;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut writer = ReportWriter::new(sink, args.report, updates).map_err(|e| e.to_string())?;
    let mut write_err = None;
    let result = run_sequence(&seq, scfg, updates, &config, args.ham.as_deref(), &mut |row| {
        if let Err(e) = writer.row(row) {
            write_err.get_or_insert(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.to_string());
    }
    match result {
        Ok(_) => Ok(ExitCode::SUCCESS),
        Err(HarnessError::Search { problem, error, .. }) => {
            eprintln!("ham: {problem}: {error}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.to_string()),
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
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("ham: {e}");
        ExitCode::from(1)
    })
}

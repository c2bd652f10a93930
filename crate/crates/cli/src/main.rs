mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use dgms::Error;

use args::{Cli, Command, CorpusCommand, GraphCommand, IndexCommand};
use config::RunConfig;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn report(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let json = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}});
    eprintln!("{json}");
    ExitCode::from(exit_code(e))
}

fn init(cfg: &RunConfig) -> Result<(), Error> {
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let common = cli.command.common();
    let mut cfg = RunConfig::resolve(common)?;
    init(&cfg)?;
    match &cli.command {
        Command::Graph(GraphCommand::Text(a)) => commands::graph_text(a, &cfg)?,
        Command::Graph(GraphCommand::Code(a)) => commands::graph_code(a, &cfg)?,
        Command::Corpus(CorpusCommand::Build(_)) => commands::corpus_build(&cfg)?,
        Command::Corpus(CorpusCommand::Synth(a)) => commands::corpus_synth(a, &cfg)?,
        Command::Train(_) => commands::train_cmd(&cfg)?,
        Command::Gradcheck(a) => {
            if !commands::gradcheck(a, &cfg)? {
                eprintln!("error: gradient check exceeded tolerance");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Index(IndexCommand::Build(_)) => commands::index_build(&mut cfg)?,
        Command::Evaluate(a) => commands::evaluate(a.pools.as_deref(), &mut cfg)?,
        Command::Search(a) => commands::search(a, &mut cfg)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::from(1),
                _ => ExitCode::from(1),
            };
        }
    };
    run(cli).unwrap_or_else(|e| report(&e))
}

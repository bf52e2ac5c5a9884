use std::process::ExitCode;

use clap::Parser;
use sectorshift::{run, Cli, EXIT_INPUT};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = cli.log_level.parse().unwrap_or(log::LevelFilter::Warn);
    env_logger::Builder::new().filter_level(level).init();

    match run(&cli) {
        Ok(outcome) => {
            for p in &outcome.outputs {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

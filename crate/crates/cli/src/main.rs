use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use confcal_cli::{render, run, Cli, EXIT_INPUT};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT as u8),
            };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(render(&outcome, cli.json).as_bytes());
            let _ = out.flush();
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("confcal: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}

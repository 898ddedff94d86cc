mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            // a closed pipe (e.g. `| head`) is not an error here
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", &e.to_string());
            return ExitCode::from(1);
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid { kind, message }) => {
            report(kind, &message);
            ExitCode::from(1)
        }
        Err(Failure::Suite) => ExitCode::from(2),
    }
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({"error": kind, "message": message.trim_end()}));
}

use std::process::ExitCode;

use clap::Parser;

use hawkes_regen_cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::ValidationFailed) => {
            eprintln!("validation failed");
            ExitCode::from(hawkes_regen_cli::error::EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use dpsketch_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(output) => {
            for note in &output.diagnostics {
                eprintln!("{note}");
            }
            print!("{}", output.stdout);
            ExitCode::from(output.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = almiso_cli::app::Cli::parse();
    match almiso_cli::app::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

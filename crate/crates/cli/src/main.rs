use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = preint_cli::Cli::parse();
    match preint_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(preint_cli::exit_code(&err))
        }
    }
}

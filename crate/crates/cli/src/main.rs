use std::process::ExitCode;

use clap::Parser;
use unroll_cli::Command;

#[derive(Parser)]
#[command(
    name = "unroll-restore",
    version,
    about = "Denoiser-driven image restoration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match unroll_cli::run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

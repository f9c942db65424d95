use std::process::ExitCode;

use clap::Parser;
use fockbath_cli::{execute, init_workers, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|_| execute(&cli.command));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fockbath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

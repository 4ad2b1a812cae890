use std::process::ExitCode;

use clap::Parser;
use wrelm::cli::{dispatch, Cli};

fn main() -> ExitCode {
    // clap prints usage errors itself and exits with 2, matching validation failures
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use trig_cli::{run, Cli};

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(outcome) => {
            if let trig_cli::error::Outcome::Partial(n) = outcome {
                eprintln!("{n} sample(s) skipped");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

use std::process;

use clap::Parser;
use randers_cli::error::ExitCode;
use randers_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            process::exit(if e.use_stderr() { ExitCode::Usage.code() } else { 0 });
        }
    };
    match run(&cli.verb) {
        Ok(outcome) => {
            println!("{}", outcome.primary.display());
            process::exit(outcome.exit.code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(e.exit_code().code());
        }
    }
}

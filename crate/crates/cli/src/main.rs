use std::process::ExitCode;

use clap::Parser;
use slnq::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = RunConfig::from_cli(cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            print!("{}", o.summary);
            if o.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("slnq: an assertion failed; see the report above");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("slnq: {e}");
            ExitCode::from(2)
        }
    }
}

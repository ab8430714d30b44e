use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use fradelay_cli::{run, Cli, Command, EXIT_FAILURE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRADELAY_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap reports its own errors with code 2, matching invalid input.
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let output = match &cli.command {
        Command::RegionCheck(a) => a.common.output.clone(),
        Command::MlEval(a)
        | Command::MlIntegral(a)
        | Command::RegionBoundary(a)
        | Command::CharRoots(a)
        | Command::Simulate(a)
        | Command::Verify(a)
        | Command::Constants(a) => a.output.clone(),
    };
    match run(&cli) {
        Ok(outcome) => {
            let written = match &output {
                Some(path) => std::fs::write(path, &outcome.output),
                None => std::io::stdout().write_all(outcome.output.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(EXIT_FAILURE as u8);
            }
            if let Some(s) = &outcome.summary {
                eprint!("{s}");
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

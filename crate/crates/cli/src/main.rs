mod args;
mod commands;
mod output;

use args::Cli;
use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = commands::run(&cli.command, &cli.common).and_then(|out| {
        commands::write(&cli.common, &out.text)?;
        match out.contract_failure {
            Some(msg) => Err(commands::CliError::Contract(msg)),
            None => Ok(()),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccrflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

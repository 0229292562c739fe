//! `boruta`: dataset generation, feature selection runs, evaluation,
//! plot-data export and scaling benchmarks.

mod commands;
mod config;
mod error;
mod manifest;

use clap::Parser;

use commands::Command;

#[derive(Parser, Debug)]
#[command(
    name = "boruta",
    version,
    about = "Boruta feature selection with random-forest importances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = commands::run(cli.command) {
        eprintln!("boruta: {e}");
        std::process::exit(e.exit_code());
    }
}

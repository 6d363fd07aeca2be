mod args;
mod commands;
mod data;
mod error;
mod manifest;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Forecast(a) => commands::forecast_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Stationarity(a) => commands::stationarity_cmd(a),
        Command::Heatmap(a) => commands::heatmap_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a),
    }
}

fn main() {
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

use std::process::ExitCode;

use clap::Parser;
use safe_adaptive::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level()).init();
    ExitCode::from(run(&cli, &mut std::io::stdout().lock()))
}

//! `eval run|score|oracle`, the evaluation subcommands as their own binary.

use beaconql::cli::{run_eval, EvalCommand};
use clap::Parser;

#[derive(Parser)]
#[command(name = "eval", version, about = "Score extraction predictions")]
struct EvalCli {
    #[command(subcommand)]
    command: EvalCommand,
}

fn main() {
    let cli = EvalCli::parse();
    std::process::exit(run_eval(cli.command, &mut std::io::stdout(), &mut std::io::stderr()));
}

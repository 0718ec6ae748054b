use clap::Parser;

fn main() {
    std::process::exit(beaconql::cli::run(beaconql::cli::Cli::parse()));
}

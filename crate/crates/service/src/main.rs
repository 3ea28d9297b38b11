use clap::Parser;
use pmax_service::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

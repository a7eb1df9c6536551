use clap::Parser;
use lifshitz_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

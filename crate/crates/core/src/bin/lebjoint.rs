use clap::Parser;

use lebesgue_joint::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

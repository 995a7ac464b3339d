use clap::Parser;
use fdd_harness::cli::{main_with, Cli};

fn main() {
    std::process::exit(main_with(&Cli::parse()));
}

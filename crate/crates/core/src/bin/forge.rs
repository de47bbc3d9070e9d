use clap::Parser;

fn main() {
    std::process::exit(forge::cli::run(forge::cli::Cli::parse()));
}

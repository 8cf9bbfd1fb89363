use clap::Parser;
use hybridsci::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

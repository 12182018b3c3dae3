use clap::Parser;
use informer_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

use clap::Parser;
use patience_cli::cli::Cli;
use patience_cli::{commands, config};

fn main() {
    // Exit code 2 is reserved for degenerate estimates, so argument errors
    // (which clap would exit 2 for by default) are mapped to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let defaults = match config::load_defaults() {
        Ok(d) => d,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    };
    match commands::run(&cli, &defaults) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

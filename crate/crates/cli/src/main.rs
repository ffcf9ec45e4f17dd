use std::process::ExitCode;

use hierstab_cli::{configure_threads, run, EXIT_USAGE};

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("hierstab: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::from(run(std::env::args_os(), &mut std::io::stdout().lock()))
}

//! Batch driver over the discovery, layout and comparison core, plus a
//! launcher for the HTTP service.

pub mod args;
pub mod commands;
pub mod error;

use clap::Parser;

pub use args::Cli;
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    use args::Command::*;
    match &cli.command {
        Ingest(a) => commands::ingest(a),
        Discover(a) => commands::discover(a),
        Layout(a) => commands::layout(a),
        Compare(a) => commands::compare(a),
        Eval(a) => commands::eval(a),
        Synth(a) => commands::synth(a),
        Serve(a) => commands::serve(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => 2,
    }
}

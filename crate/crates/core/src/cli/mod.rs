//! The `almg` command-line interface.

pub mod config;
pub mod run;

use clap::Parser;

pub use config::{Cli, CommandKind, RunConfig};
pub use run::{compute, run, CliError, RunOutput, RunReport};

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_cli(&cli).map_err(CliError::Config).and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match result {
        Ok((cfg, report)) => {
            for line in &report.output.summary {
                println!("{line}");
            }
            if report.verified {
                println!("verified {} files against {}", report.output.files.entries().len(), cfg.output_dir.display());
            } else {
                println!("wrote {} ({:.2} s)", cfg.output_dir.display(), report.wall_time_seconds);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

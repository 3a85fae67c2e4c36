//! Command-line pipelines: dataset generation, architecture search,
//! training, evaluation, early-exit inference, quantization, threshold
//! profiling and robustness sweeps.
//!
//! [`run`] is the whole program minus process exit; the binary maps its
//! error to one stderr line and an exit code from [`exit`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

pub use cli::{Cli, Command};
pub use config::OUT_DIR_ENV;
pub use error::{exit, CliError, CliResult};

/// Parses `args` (program name first) and runs the command. Help and
/// version requests print to stdout and return no files.
pub fn run<I, T>(args: I) -> CliResult<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(Vec::new());
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            return Err(CliError::Usage("missing subcommand (see --help)".into()));
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::Usage(first.to_string()));
        }
    };
    match &cli.command {
        Command::GenData(f) => commands::gen_data(f),
        Command::Search(f) => commands::search_cmd(f),
        Command::Train(f) => commands::train_cmd(f),
        Command::Eval(f) => commands::eval_cmd(f),
        Command::Infer(f) => commands::infer_cmd(f),
        Command::Quantize(f) => commands::quantize_cmd(f),
        Command::Profile(f) => commands::profile_cmd(f),
        Command::Robustness(f) => commands::robustness_cmd(f),
    }
}

/// Help for the top level (`None`) or one subcommand, exactly as
/// `--help` prints it.
pub fn help_text(subcommand: Option<&str>) -> Option<String> {
    let mut args = vec!["cascade-edl"];
    if let Some(name) = subcommand {
        Cli::command().find_subcommand(name)?;
        args.push(name);
    }
    args.push("--help");
    match Cli::try_parse_from(args) {
        Err(e) if e.kind() == ErrorKind::DisplayHelp => Some(e.render().to_string()),
        _ => None,
    }
}

/// Subcommand names in declaration order.
pub fn subcommands() -> Vec<String> {
    Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect()
}

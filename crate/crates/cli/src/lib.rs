//! `nsunlearn`: generation, unlearning, evaluation and reporting as
//! reproducible subcommands. Exit codes: 0 success, 1 usage, 2 data or
//! format error, 3 numerical-contract failure.

mod args;
mod commands;
mod report;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use args::Cli;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(nullspace_unlearn::Error),
    /// A core error tied to the file it came from.
    AtPath(PathBuf, nullspace_unlearn::Error),
    /// A check the command itself ran did not hold.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::AtPath(_, e) if e.is_numerical() => 3,
            CliError::AtPath(..) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::AtPath(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<nullspace_unlearn::Error> for CliError {
    fn from(e: nullspace_unlearn::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub(crate) trait AtPath<T> {
    fn at(self, path: &Path) -> Result<T, CliError>;
}

impl<T> AtPath<T> for nullspace_unlearn::Result<T> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| CliError::AtPath(path.to_path_buf(), e))
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = write!(out, "{}", e.render());
            return 0;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("error: invalid arguments");
            let _ = writeln!(err, "{first} (try --help)");
            return 1;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

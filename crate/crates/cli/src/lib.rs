//! Argument parsing and dispatch for the `ropelab` binary.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical or domain error, 4 I/O
//! error (including unreadable or malformed input files).

mod args;
mod commands;

use std::fmt::Debug;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use args::{Action, Format, PackMode, PeArgs, PeName, PolicyArg, StyleArg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// A validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Action,
    pub output: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UsageError {
    /// `--help` or `--version`; print the text and exit 0.
    Info(String),
    /// One-line diagnostic.
    Invalid(String),
}

impl UsageError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        UsageError::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            UsageError::Info(_) => EXIT_OK,
            UsageError::Invalid(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UsageError::Info(s) => f.write_str(s),
            UsageError::Invalid(s) => write!(f, "error: {s}"),
        }
    }
}

/// Folds a clap diagnostic into one line, dropping the usage block and hints.
fn one_line(err: &clap::Error) -> String {
    let rendered = err.render().to_string();
    let body: Vec<&str> = rendered
        .lines()
        .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    body.join(" ")
        .trim_start_matches("error:")
        .trim()
        .to_string()
}

/// Parses arguments that follow the program name.
pub fn parse_args<S: AsRef<str>>(argv: &[S]) -> Result<Command, UsageError> {
    let full = std::iter::once("ropelab").chain(argv.iter().map(AsRef::as_ref));
    let cli = match args::Cli::try_parse_from(full) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return Err(match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    UsageError::Info(e.render().to_string())
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    UsageError::invalid("a subcommand is required; see --help")
                }
                _ => UsageError::Invalid(one_line(&e)),
            });
        }
    };
    if let Some(pe) = cli.action.pe_args() {
        pe.check()?;
    }
    let allowed = cli.action.formats();
    let format = match cli.format {
        None => allowed[0],
        Some(f) if allowed.contains(&f) => f,
        Some(f) => {
            return Err(UsageError::invalid(format!(
                "--format {} is not supported by {}",
                match f {
                    Format::Csv => "csv",
                    Format::Json => "json",
                },
                cli.action.name()
            )))
        }
    };
    Ok(Command {
        action: cli.action,
        output: cli.output,
        format,
    })
}

#[derive(Debug)]
pub(crate) enum CliError {
    Domain { name: String, message: String },
    Io(String),
}

impl CliError {
    pub(crate) fn domain<E: Debug + std::fmt::Display>(e: E) -> Self {
        CliError::Domain {
            name: error_name(&format!("{e:?}")),
            message: e.to_string(),
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

/// Innermost variant name of a derived `Debug` string, e.g.
/// `Pe(ZeroNorm)` -> `ZeroNorm`.
fn error_name(debug: &str) -> String {
    let mut rest = debug;
    loop {
        let end = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        let ident = &rest[..end];
        let tail = &rest[end..];
        match tail.strip_prefix('(') {
            Some(inner) if inner.starts_with(|c: char| c.is_ascii_uppercase()) => rest = inner,
            _ => return ident.to_string(),
        }
    }
}

/// Executes `cmd`, writing results to its output path or `stdout` and
/// diagnostics to `stderr`. Returns the exit code.
pub fn run_with(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = commands::execute(cmd, stderr).and_then(|text| match &cmd.output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("stdout", e)),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Domain { name, message }) => {
            let _ = writeln!(stderr, "error: {name}: {message}");
            EXIT_DOMAIN
        }
        Err(CliError::Io(message)) => {
            let _ = writeln!(stderr, "error: {message}");
            EXIT_IO
        }
    }
}

pub fn run(cmd: &Command) -> i32 {
    run_with(cmd, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

mod args;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::path::Path;

use clap::Parser;
use serde::de::DeserializeOwned;

use args::{Cli, Command};

/// Exit status for invalid flags or configuration.
const EXIT_USAGE: i32 = 2;
/// Exit status when the requested point is physically ill-posed.
const EXIT_PHYSICS: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(nhwind::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_physics() => EXIT_PHYSICS,
            CliError::Lib(nhwind::Error::Io(_)) => 1,
            CliError::Lib(_) => EXIT_USAGE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => e.kind(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<nhwind::Error> for CliError {
    fn from(e: nhwind::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn load_section<T: DeserializeOwned + Default>(config: Option<&Path>, section: &str) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    const SECTIONS: [&str; 6] = ["texture", "winding", "phase-diagram", "prepare", "dilation-check", "genexp"];
    if let Some(bad) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("unknown config section [{bad}]")));
    }
    match table.get(section) {
        None => Ok(T::default()),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e| CliError::Usage(format!("config section [{section}]: {e}"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    let section = cli.command.section();
    match cli.command {
        Command::Texture(a) => commands::texture(a.merge(load_section(config, section)?), false),
        Command::Winding(a) => commands::texture(a.merge(load_section(config, section)?), true),
        Command::PhaseDiagram(a) => commands::phase_diagram(a.merge(load_section(config, section)?)),
        Command::Prepare(a) => commands::prepare(a.merge(load_section(config, section)?)),
        Command::DilationCheck(a) => commands::dilation_check(a.merge(load_section(config, section)?)),
        Command::Genexp(a) => commands::genexp(a.merge(load_section(config, section)?)),
    }
}

fn main_with<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            let record = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{record}");
            code
        }
    }
}

fn main() {
    std::process::exit(main_with(std::env::args_os()));
}

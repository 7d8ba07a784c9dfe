//! `ftpath` command-line front end. Every run writes its results together
//! with the fully resolved configuration, so a report can be replayed.

mod args;
mod commands;
mod output;

use std::ffi::OsString;

use clap::Parser;

pub use args::parse_count;
pub use output::SCHEMA_VERSION;

use args::{Cli, Command};
use output::ResolvedGlobals;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(ftpath::Error),
    Io(String),
}

impl From<ftpath::Error> for CliError {
    fn from(e: ftpath::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(ftpath::Error::Invariant(_)) | CliError::Io(_) => EXIT_INTERNAL,
            CliError::Core(_) | CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

fn resolve(g: &args::GlobalArgs) -> Result<ResolvedGlobals, CliError> {
    let seed = match std::env::var("FT_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!("FT_SEED must be an unsigned integer, got {v:?}"))
        })?,
        Err(_) => g.seed,
    };
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // A pool may already exist when embedded; its size then stands.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    Ok(ResolvedGlobals {
        seed,
        samples: g.samples,
        threads: rayon::current_num_threads(),
        format: g.format,
        output: g.output.clone(),
    })
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let g = resolve(&cli.global)?;
    let (name, (params, outcome)) = match &cli.command {
        Command::Kernel(a) => ("kernel", commands::kernel(&g, a)?),
        Command::Mass(a) => ("mass", commands::mass(&g, a)?),
        Command::Check(a) => ("check", commands::check(&g, a)?),
        Command::Pair(a) => ("pair", commands::pair_cmd(&g, a)?),
        Command::Evolve(a) => ("evolve", commands::evolve(&g, a)?),
        Command::Scatter(a) => ("scatter", commands::scatter(&g, a)?),
        Command::Verify => ("verify", commands::verify(&g)?),
    };
    let bytes = output::render(name, &g, &params, &outcome)?;
    output::emit(&bytes, g.output.as_ref())?;
    Ok(if outcome.failed {
        EXIT_VERIFY_FAILED
    } else {
        EXIT_OK
    })
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ftpath: {e}");
            e.exit_code()
        }
    }
}

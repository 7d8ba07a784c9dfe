use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;
use crate::CliError;

/// Bumped whenever the layout of a report changes.
pub const SCHEMA_VERSION: &str = "1";

/// Globals after environment overrides and thread-pool setup.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedGlobals {
    pub seed: u64,
    pub samples: usize,
    pub threads: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Flat table for CSV output.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// What a subcommand hands back for rendering.
pub struct Outcome {
    pub results: Value,
    pub table: Table,
    /// A verification row failed.
    pub failed: bool,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: &'static str,
    command: &'a str,
    config: Config<'a>,
    results: &'a Value,
}

#[derive(Serialize)]
struct Config<'a> {
    #[serde(flatten)]
    globals: &'a ResolvedGlobals,
    params: &'a Value,
}

pub fn render(
    command: &str,
    globals: &ResolvedGlobals,
    params: &Value,
    outcome: &Outcome,
) -> Result<Vec<u8>, CliError> {
    let config = Config { globals, params };
    match globals.format {
        Format::Json => {
            let report = Report {
                schema_version: SCHEMA_VERSION,
                command,
                config,
                results: &outcome.results,
            };
            let mut text =
                serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
            text.push(b'\n');
            Ok(text)
        }
        Format::Csv => {
            let mut out = Vec::new();
            let config = serde_json::to_string(&config).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out, "# schema_version: {SCHEMA_VERSION}").expect("in-memory write");
            writeln!(out, "# command: {command}").expect("in-memory write");
            writeln!(out, "# config: {config}").expect("in-memory write");
            let mut w = csv::Writer::from_writer(&mut out);
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(&outcome.table.header).map_err(io)?;
            for row in &outcome.table.rows {
                w.write_record(row).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            drop(w);
            Ok(out)
        }
    }
}

pub fn emit(bytes: &[u8], path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

//! CSV emission. Every file starts with `#` comment lines carrying the tool
//! version, the command, the resolved configuration and any overrides.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use cogduty::{Policy, PolicyEvaluation};

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

pub const VERSION_LINE: &str = concat!("cogduty ", env!("CARGO_PKG_VERSION"));

pub fn header(command: &str, resolved: &Resolved, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![VERSION_LINE.to_string(), format!("command = {command}")];
    for (key, value) in resolved.config.entries() {
        lines.push(format!("{key} = {value}"));
    }
    for (key, value) in extra {
        lines.push(format!("{key} = {value}"));
    }
    for o in &resolved.overrides {
        lines.push(format!("override {o}"));
    }
    lines
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_table(path: Option<&Path>, header: &[String], table: &Table) -> CliResult<()> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            emit(file, header, table).map_err(|e| match e {
                EmitError::Io(source) => CliError::io(path, source),
                EmitError::Csv(e) => CliError::Csv(e),
            })
        }
        None => emit(io::stdout().lock(), header, table).map_err(|e| match e {
            EmitError::Io(source) => CliError::io("<stdout>", source),
            EmitError::Csv(e) => CliError::Csv(e),
        }),
    }
}

enum EmitError {
    Io(io::Error),
    Csv(csv::Error),
}

fn emit<W: Write>(mut out: W, header: &[String], table: &Table) -> Result<(), EmitError> {
    for line in header {
        writeln!(out, "# {line}").map_err(EmitError::Io)?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(&table.columns).map_err(EmitError::Csv)?;
    for row in &table.rows {
        writer.write_record(row).map_err(EmitError::Csv)?;
    }
    writer.flush().map_err(EmitError::Io)
}

pub fn num(x: f64) -> String {
    x.to_string()
}

/// Column names for optimization and evaluation rows.
pub fn policy_columns(policy: &Policy) -> Vec<String> {
    let mut cols: Vec<String> = ["alpha", "objective", "rate_s", "rate_p"].map(String::from).to_vec();
    match policy {
        Policy::Perfect(_) => cols.extend(["p_free", "t_free", "p_busy", "t_busy"].map(String::from)),
        Policy::Soft(p) => {
            let s = p.thresholds.len();
            cols.extend((1..=s).map(|k| format!("thr_{k}")));
            cols.extend((1..=s + 1).map(|k| format!("p_{k}")));
            cols.extend((1..=s + 1).map(|k| format!("t_{k}")));
        }
    }
    cols.extend(["p_ss", "mu"].map(String::from));
    cols
}

pub fn policy_row(policy: &Policy, eval: &PolicyEvaluation) -> Vec<String> {
    let mut row = vec![
        num(eval.alpha),
        num(eval.objective),
        num(eval.rate_secondary),
        num(eval.rate_primary),
    ];
    match policy {
        Policy::Perfect(p) => row.extend([p.p_free, p.t_free, p.p_busy, p.t_busy].map(num)),
        Policy::Soft(p) => {
            row.extend(p.thresholds.values().iter().copied().map(num));
            row.extend(p.powers.iter().copied().map(num));
            row.extend(p.durations.iter().copied().map(num));
        }
    }
    row.extend([eval.p_ss, eval.mean_cycle].map(num));
    row
}

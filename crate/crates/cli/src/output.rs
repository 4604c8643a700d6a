//! CSV documents with `#` metadata lines.
//!
//! The first line is always the schema version, e.g.
//! `# schema: dpmqkd/asymptotic-sweep/1`. A `# generated_unix_s` line is
//! added unless timestamps are disabled; every other metadata line is a
//! pure function of the inputs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dpmqkd::numeric::format_float;

use crate::failure::Failure;

pub const OUT_DIR_ENV: &str = "DPMQKD_OUT_DIR";
pub const SCHEMA_REVISION: u32 = 1;

pub fn float(x: f64) -> String {
    format_float(x)
}

/// `--out` if given, else `$DPMQKD_OUT_DIR/<name>`, else standard output.
pub fn resolve_target(out: Option<&Path>, name: &str) -> Option<PathBuf> {
    match out {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(name)),
    }
}

pub fn open(target: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match target {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Failure::Usage(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub struct CsvDoc {
    command: &'static str,
    meta: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Self {
        Self { command, meta: Vec::new(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn write_to(&self, out: &mut dyn Write, timestamp: bool) -> Result<(), Failure> {
        writeln!(out, "# schema: dpmqkd/{}/{SCHEMA_REVISION}", self.command)?;
        writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"))?;
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            writeln!(out, "# generated_unix_s: {secs}")?;
        }
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        out.flush()?;
        Ok(())
    }

    pub fn emit(&self, target: Option<&Path>, timestamp: bool) -> Result<(), Failure> {
        let mut out = open(target)?;
        self.write_to(&mut *out, timestamp)
    }
}

//! CSV and JSON writers. Every CSV starts with `# key: value` comment lines,
//! the first of which names the schema.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a value for a CSV cell: shortest round-trip decimal, empty when absent.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_nan() => String::new(),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    /// Creates `path`, writes the comment preamble and the column header.
    pub fn create(path: &Path, schema: &str, meta: &[(&str, String)], columns: &[&str]) -> Result<Self, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut buf = BufWriter::new(File::create(path)?);
        writeln!(buf, "# schema: {schema}")?;
        writeln!(buf, "# version: {VERSION}")?;
        for (k, v) in meta {
            writeln!(buf, "# {k}: {v}")?;
        }
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(columns)?;
        Ok(CsvOut { writer })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.writer.write_record(cells)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut buf = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut buf, value)?;
    writeln!(buf)?;
    buf.flush()?;
    Ok(())
}

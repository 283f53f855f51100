//! Structured-text reports: `key = value` lines, CSV tables and binary artifacts.

use std::path::Path;

use psido::io::sha256_hex;
use psido::{Error, Result};

/// Shortest round-trip rendering, so reports are exact and stable.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), num)
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub tables: Vec<Table>,
    /// File name and contents.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn set_num(&mut self, key: &str, value: f64) {
        self.set(key, num(value));
    }

    /// Records a tolerance; every threshold used by a verdict goes through here.
    pub fn tol(&mut self, key: &str, value: f64) {
        self.set(&format!("tol.{key}"), num(value));
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn artifact(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push((name.into(), bytes));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Writes `report.txt`, the tables, the artifacts and `provenance.txt` into `dir`.
    pub fn write(&self, dir: &Path, provenance: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut prov = provenance.to_string();
        let text = self.text();
        std::fs::write(dir.join("report.txt"), &text)?;
        prov.push_str(&format!("file.report.txt.sha256 = {}\n", sha256_hex(text.as_bytes())));
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            let bytes = t.to_csv()?;
            std::fs::write(dir.join(&name), &bytes)?;
            prov.push_str(&format!("file.{name}.sha256 = {}\n", sha256_hex(&bytes)));
        }
        for (name, bytes) in &self.artifacts {
            std::fs::write(dir.join(name), bytes)?;
            prov.push_str(&format!("file.{name}.sha256 = {}\n", sha256_hex(bytes)));
        }
        std::fs::write(dir.join("provenance.txt"), prov)?;
        Ok(())
    }
}

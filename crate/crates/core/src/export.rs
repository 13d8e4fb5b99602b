//! Plain-text table output shared by every module.
//!
//! Tables are CSV with an optional block of `# key: value` comment lines in
//! front. Floats use Rust's shortest round-trip formatting, so identical
//! inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered `key: value` pairs written as leading comment lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Metadata(Vec::new())
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        for (k, v) in &self.0 {
            // newlines would break the comment block
            let v = v.replace(['\n', '\r'], " ");
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
    }
}

/// A header plus rows of already-formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row<I, T>(&mut self, cells: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        self.rows.push(cells.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn to_csv(&self, meta: Option<&Metadata>) -> Result<String> {
        let mut buf = Vec::new();
        if let Some(m) = meta {
            m.write_to(&mut buf);
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header).map_err(csv_err)?;
            for r in &self.rows {
                if r.len() != self.header.len() {
                    return Err(Error::InvalidArgument(format!(
                        "row has {} cells, header has {}",
                        r.len(),
                        self.header.len()
                    )));
                }
                w.write_record(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
        String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path, meta: Option<&Metadata>) -> Result<()> {
        let text = self.to_csv(meta)?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Parses CSV text, skipping `#` comment lines.
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column {name:?}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

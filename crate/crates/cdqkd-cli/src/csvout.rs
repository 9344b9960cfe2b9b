//! Minimal CSV writer with RFC-4180-style quoting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub struct CsvFile {
    inner: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(CsvFile {
            inner: BufWriter::new(File::create(path)?),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> std::io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for field in fields {
            if !first {
                self.inner.write_all(b",")?;
            }
            first = false;
            self.inner.write_all(escape(field.as_ref()).as_bytes())?;
        }
        self.inner.write_all(b"\r\n")
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Quote a field when it contains a comma, quote or line break; embedded
/// quotes are doubled.
fn escape(field: &str) -> String {
    if field.contains(['"', ',', '\n', '\r']) {
        let mut out = String::with_capacity(field.len() + 2);
        out.push('"');
        for c in field.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
        out
    } else {
        field.to_string()
    }
}

/// Canonical shortest-round-trip float formatting.
pub fn num(x: f64) -> String {
    format!("{x}")
}

//! Reading the CSV tables this tool writes back in (for plotting).

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| CliError::config(format!("{origin}: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(|f| f.trim().to_string()).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| CliError::config(format!("{origin}: {e}")))?;
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("missing column {name:?} (have: {})", self.header.join(","))))
    }

    /// Numeric value of a cell; empty or unparsable cells read as NaN.
    pub fn number(&self, row: usize, col: usize) -> f64 {
        self.rows[row].get(col).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)
    }

    pub fn require_rows(&self, origin: &str) -> CliResult<()> {
        if self.rows.is_empty() {
            return Err(CliError::config(format!("{origin}: no data rows")));
        }
        Ok(())
    }
}

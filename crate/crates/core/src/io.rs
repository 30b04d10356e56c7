//! Deterministic text formatting shared by the CSV and JSON writers.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0 so that byte-identical output does not depend on sign of zero
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Writes a CSV with a single header row. Rows are pre-formatted fields.
pub fn write_csv<W: Write>(header: &[&str], rows: &[Vec<String>], mut out: W) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Column-oriented output shared by the CSV and JSON writers. Cells are
/// pre-formatted with [`fmt_f64`] so both forms carry identical digits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_csv(&header, &self.rows, out)
    }

    /// `{"columns": [...], "rows": [[...], ...]}`; numeric cells become JSON
    /// numbers.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let cell = |c: &String| match c.parse::<f64>() {
            Ok(x) if x.is_finite() => serde_json::json!(x),
            _ => serde_json::json!(c),
        };
        let rows: Vec<Vec<serde_json::Value>> = self.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        write_json(&serde_json::json!({ "columns": self.header, "rows": rows }), out)
    }
}

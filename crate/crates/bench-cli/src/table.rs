//! CSV result tables with a provenance header.
//!
//! Layout: `# key: value` comment lines (scenario, name, config hash, seed,
//! version), then a header row and the data rows. Numbers use Rust's
//! shortest round-trip formatting, so parsing a written table gives back
//! exactly the same cells.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Cell value of a bound that diverges (`sin BT → 0`).
pub const DIVERGENT: &str = "DIVERGENT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub name: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    fn entries(&self) -> [(&'static str, String); 5] {
        [
            ("scenario", self.scenario.clone()),
            ("name", self.name.clone()),
            ("config_sha256", self.config_sha256.clone()),
            ("seed", self.seed.to_string()),
            ("version", self.version.clone()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats a number (shortest round-trip form, exponent for very large or
/// small magnitudes); infinities become [`DIVERGENT`].
pub fn num(v: f64) -> String {
    if v.is_infinite() {
        DIVERGENT.to_string()
    } else {
        format!("{v:?}")
    }
}

impl ResultTable {
    pub fn new(provenance: Provenance, columns: Vec<String>) -> Self {
        Self { provenance, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell `(row, column)` as a number; `None` for missing, empty or
    /// sentinel cells.
    pub fn f64_at(&self, row: usize, column: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(column)?)?.parse().ok()
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&str> {
        self.rows.get(row)?.get(self.column(column)?).map(String::as_str)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        for (k, v) in self.provenance.entries() {
            writeln!(w, "# {k}: {v}")?;
        }
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self, CliError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut fields = std::collections::BTreeMap::new();
        let mut body = text.as_str();
        while let Some(line) = body.strip_prefix("# ") {
            let (line, rest) = line.split_once('\n').unwrap_or((line, ""));
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| CliError::Table(format!("bad provenance line `{line}`")))?;
            fields.insert(k.to_string(), v.to_string());
            body = rest;
        }
        let mut take = |k: &str| fields.remove(k).ok_or_else(|| CliError::Table(format!("missing provenance `{k}`")));
        let provenance = Provenance {
            scenario: take("scenario")?,
            name: take("name")?,
            config_sha256: take("config_sha256")?,
            seed: take("seed")?.parse().map_err(|_| CliError::Table("seed is not an integer".into()))?,
            version: take("version")?,
        };
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns = rd.headers()?.iter().map(String::from).collect();
        let rows = rd
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { provenance, columns, rows })
    }
}

//! Numeric result tables with provenance, emitted as CSV or JSON.
//!
//! CSV layout: `#`-prefixed `key: value` provenance lines, a header row, then
//! one row per record with every value printed to 12 significant digits.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a table came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON of the experiment spec.
    pub spec_hash: String,
    /// Further `key: value` records, in order.
    #[serde(default)]
    pub extra: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(spec: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            version: VERSION.to_string(),
            seed,
            spec_hash: spec_hash(spec)?,
            extra: Vec::new(),
        })
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    /// Numeric record, printed like the table body.
    pub fn with_num(self, key: impl Into<String>, value: f64) -> Self {
        self.with(key, format_g12(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Hex SHA-256 of the JSON encoding of `spec`.
pub fn spec_hash(spec: &impl Serialize) -> Result<String> {
    let json = serde_json::to_vec(spec)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Table(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(provenance: Provenance, columns: &[&str]) -> Self {
        Self {
            provenance,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Table(format!(
                "row has {} values, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// The table as it reads back from CSV: every value cut to 12 significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| format_g12(v).parse().unwrap_or(v)).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn write(&self, out: impl Write, format: Format) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
                Ok(())
            }
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let p = &self.provenance;
        writeln!(out, "# version: {}", p.version)?;
        match p.seed {
            Some(s) => writeln!(out, "# seed: {s}")?,
            None => writeln!(out, "# seed: none")?,
        }
        writeln!(out, "# spec_hash: {}", p.spec_hash)?;
        for (k, v) in &p.extra {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_g12(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Table(e.to_string()))
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut provenance = Provenance::default();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(comment) = line.strip_prefix('#') {
                let (k, v) = comment
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::Table(format!("malformed provenance line `{line}`")))?;
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "version" => provenance.version = v.to_string(),
                    "seed" => {
                        provenance.seed = match v {
                            "none" => None,
                            s => Some(s.parse().map_err(|_| Error::Table(format!("bad seed `{s}`")))?),
                        }
                    }
                    "spec_hash" => provenance.spec_hash = v.to_string(),
                    _ => provenance.extra.push((k.to_string(), v.to_string())),
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Table(format!("bad number `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self {
            provenance,
            columns,
            rows,
        })
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

/// `%.12g`-style formatting.
pub fn format_g12(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

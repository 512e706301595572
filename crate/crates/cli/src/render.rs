//! Output formats. Every result is a table of strings; JSONL rows are
//! objects keyed by column, CSV rows follow the header, and pretty output is
//! aligned text.

use std::io::{self, Write};

use heron_core::sieve::{format_significant, RankDistribution};
use heron_core::ScanRecord;
use serde_json::{Map, Value};

use crate::config::{CliResult, Format};

/// Header of the CSV export of scan records.
pub const SCAN_CSV_HEADER: [&str; 11] = [
    "k", "a2", "a4", "a6", "torsion", "S100", "S1000", "S10000", "rank_lower", "selmer_upper", "status",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// A one-row table from `(column, value)` pairs.
    pub fn record<K: Into<String>, V: Into<String>>(fields: impl IntoIterator<Item = (K, V)>) -> Self {
        let (columns, row): (Vec<String>, Vec<String>) =
            fields.into_iter().map(|(k, v)| (k.into(), v.into())).unzip();
        Table { columns, rows: vec![row] }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> CliResult<()> {
        match format {
            Format::Jsonl => {
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                        .collect();
                    writeln!(out, "{}", Value::Object(obj))?;
                }
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
            Format::Pretty if self.rows.len() == 1 => {
                let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0);
                for (k, v) in self.columns.iter().zip(&self.rows[0]) {
                    writeln!(out, "{k:<width$}  {v}")?;
                }
            }
            Format::Pretty => {
                let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
                for row in &self.rows {
                    for (w, v) in widths.iter_mut().zip(row) {
                        *w = (*w).max(v.len());
                    }
                }
                let line = |cells: &[String], out: &mut dyn Write| -> io::Result<()> {
                    let padded: Vec<String> =
                        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                    writeln!(out, "{}", padded.join("  ").trim_end())
                };
                line(&self.columns, out)?;
                for row in &self.rows {
                    line(row, out)?;
                }
            }
        }
        Ok(())
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn score(v: Option<f64>) -> String {
    v.map(format_significant).unwrap_or_default()
}

/// Scan records under the CSV schema; pretty output uses the same columns.
pub fn scan_table(records: &[ScanRecord]) -> Table {
    let mut t = Table::new(SCAN_CSV_HEADER);
    for r in records {
        t.push([
            r.k.clone(),
            r.a2.clone(),
            r.a4.clone(),
            r.a6.clone(),
            opt(&r.torsion),
            score(r.s100),
            score(r.s1000),
            score(r.s10000),
            opt(&r.rank_lower),
            opt(&r.selmer_upper),
            r.status.to_string(),
        ]);
    }
    t
}

/// Records in the chosen format; JSONL keeps the full record schema.
pub fn write_records(records: &[ScanRecord], format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Jsonl => {
            for r in records {
                writeln!(out, "{}", record_line(r)?)?;
            }
            Ok(())
        }
        _ => scan_table(records).write(format, out),
    }
}

/// One record as a JSON line without the trailing newline.
pub fn record_line(r: &ScanRecord) -> CliResult<String> {
    serde_json::to_string(r).map_err(|e| io::Error::other(e).into())
}

pub fn distribution_table(d: &RankDistribution) -> Table {
    let mut t = Table::new(["rank", "percent"]);
    for (rank, pct) in &d.ranks {
        t.push([rank.to_string(), format!("{pct:.1}")]);
    }
    t.push(["undetermined".to_string(), format!("{:.1}", d.undetermined)]);
    t.push(["curves".to_string(), d.total.to_string()]);
    t
}

/// Pretty output is the rank/percent layout; other formats are tables.
pub fn write_distribution(d: &RankDistribution, format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Pretty => Ok(writeln!(out, "{d}")?),
        _ => distribution_table(d).write(format, out),
    }
}

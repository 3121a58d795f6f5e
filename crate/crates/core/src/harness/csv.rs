use std::fmt::Write as _;
use std::path::Path;

use super::RejectionTable;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "setting,D_label,n,m,error,method,reject_pct,mc_halfwidth_pct,mean_time_s,replicates,failures";

/// Quote a field if it would otherwise break the row.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV text for a table: header, rows sorted by key, trailing newline.
pub fn render_csv(table: &RejectionTable) -> String {
    let mut rows: Vec<_> = table.rows.iter().collect();
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.1},{:.2},{:.2},{},{}",
            field(&r.setting),
            field(&r.d_label),
            r.n,
            r.m,
            field(&r.error),
            r.method,
            r.reject_pct,
            r.mc_halfwidth_pct,
            r.mean_time_s,
            r.replicates_used,
            r.failures
        );
    }
    out
}

pub fn emit_csv(table: &RejectionTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_csv(table))
        .map_err(|e| Error::IoError(format!("{}: {e}", path.display())))
}

/// One parsed line of an emitted table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub setting: String,
    pub d_label: String,
    pub n: usize,
    pub m: usize,
    pub error: String,
    pub method: String,
    pub reject_pct: f64,
    pub mc_halfwidth_pct: f64,
    pub mean_time_s: f64,
    pub replicates: usize,
    pub failures: usize,
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut rdr = ::csv::Reader::from_path(path)
        .map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::IoError(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::IoError(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::IoError(e.to_string()))?;
        let bad = |i: usize| Error::IoError(format!("bad value `{}` in column {i}", &rec[i]));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(i));
        rows.push(CsvRow {
            setting: rec[0].to_string(),
            d_label: rec[1].to_string(),
            n: int(2)?,
            m: int(3)?,
            error: rec[4].to_string(),
            method: rec[5].to_string(),
            reject_pct: num(6)?,
            mc_halfwidth_pct: num(7)?,
            mean_time_s: num(8)?,
            replicates: int(9)?,
            failures: int(10)?,
        });
    }
    Ok(rows)
}

//! CSV and JSON output for convergence studies.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::study::{LevelRecord, Orders, StudyConfig, StudyResult};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "ne,h,err_u,err_flux_raw,err_superclose,err_recovered";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Structured,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "structured" | "json" => Ok(Format::Structured),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    ne: usize,
    h: f64,
    err_u: f64,
    err_flux_raw: f64,
    err_superclose: f64,
    err_recovered: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes the six table columns; a header line is written even with no rows.
pub fn write_csv<W: Write>(records: &[LevelRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in records {
        w.serialize(CsvRow {
            ne: r.ne,
            h: r.h,
            err_u: r.err_u,
            err_flux_raw: r.err_flux_raw,
            err_superclose: r.err_superclose,
            err_recovered: r.err_recovered,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[LevelRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads records written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<LevelRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header '{}'", header.join(","))));
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(LevelRecord {
                ne: row.ne,
                h: row.h,
                err_u: row.err_u,
                err_flux_raw: row.err_flux_raw,
                err_superclose: row.err_superclose,
                err_recovered: row.err_recovered,
                err_nodal: None,
            })
        })
        .collect()
}

/// Natural logarithms of `h` and of every error column, for log-log plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub log_h: f64,
    pub log_err_u: f64,
    pub log_err_flux_raw: f64,
    pub log_err_superclose: f64,
    pub log_err_recovered: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_err_nodal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub config: StudyConfig,
    pub seed: u64,
    pub records: Vec<LevelRecord>,
    pub loglog: Vec<LogRow>,
    pub orders: Orders,
}

impl StructuredReport {
    pub fn new(result: &StudyResult) -> Self {
        let loglog = result
            .records
            .iter()
            .map(|r| LogRow {
                log_h: r.h.ln(),
                log_err_u: r.err_u.ln(),
                log_err_flux_raw: r.err_flux_raw.ln(),
                log_err_superclose: r.err_superclose.ln(),
                log_err_recovered: r.err_recovered.ln(),
                log_err_nodal: r.err_nodal.map(f64::ln),
            })
            .collect();
        StructuredReport {
            config: result.config.clone(),
            seed: result.config.seed,
            records: result.records.clone(),
            loglog,
            orders: result.orders.clone(),
        }
    }
}

/// Writes a study in the requested format to `path`, or to stdout when `path` is `None`.
pub fn emit_report(result: &StudyResult, format: Format, path: Option<&Path>) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    write_report(result, format, sink)
}

pub fn write_report<W: Write>(result: &StudyResult, format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => write_csv(&result.records, out),
        Format::Structured => {
            // non-finite log values (zero errors) become null
            serde_json::to_writer_pretty(&mut out, &StructuredReport::new(result))?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
    }
}

//! CSV ingestion and emission of observed count tables.
//!
//! Format: UTF-8, LF line endings, header `source,basis,total,error`,
//! one row per (source, measured basis) cell. `source` ∈ {Z1, Z2, X1,
//! X2, VAC}, `basis` ∈ {Z, X}. Counts may be fractional (published
//! tables report multi-run averages); an empty `error` field records a
//! cell whose error count was not disclosed. Emission is byte-stable:
//! fixed cell order, shortest round-trip float formatting, dot decimal
//! separator regardless of locale.

use std::path::Path;

use decoyrate_core::{Basis, CellCounts, CountsError, CountsTable, ModelError, Source};
use thiserror::Error;

/// Exact header required on every counts file.
pub const COUNTS_HEADER: &str = "source,basis,total,error";

/// Count-file failures.
#[derive(Debug, Error)]
pub enum CountsIoError {
    /// File could not be read or written.
    #[error("cannot access {path}: {source}")]
    Io {
        /// Offending path.
        path: String,
        /// Underlying I/O failure.
        source: std::io::Error,
    },
    /// Malformed CSV structure.
    #[error("{0}")]
    Csv(#[from] csv::Error),
    /// Header differs from [`COUNTS_HEADER`].
    #[error("expected header `{COUNTS_HEADER}`, found `{found}`")]
    Header {
        /// The header actually present.
        found: String,
    },
    /// A field failed to parse, reported with its row.
    #[error("row {row}: {message}")]
    Field {
        /// 1-based data-row number (header excluded).
        row: usize,
        /// What failed to parse.
        message: String,
    },
    /// Unknown source or basis label.
    #[error("row {row}: {source}")]
    Label {
        /// 1-based data-row number.
        row: usize,
        /// The label error.
        source: ModelError,
    },
    /// Semantic violation (duplicate cell, error > total, ...).
    #[error(transparent)]
    Table(#[from] CountsError),
}

/// Parse a counts table from CSV text; `label` names the source in errors.
pub fn parse_counts_str(text: &str) -> Result<CountsTable, CountsIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != COUNTS_HEADER {
        return Err(CountsIoError::Header { found: header });
    }
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != 4 {
            return Err(CountsIoError::Field {
                row,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let source: Source = record[0]
            .parse()
            .map_err(|e| CountsIoError::Label { row, source: e })?;
        let basis: Basis = record[1]
            .parse()
            .map_err(|e| CountsIoError::Label { row, source: e })?;
        let total: f64 = record[2].parse().map_err(|_| CountsIoError::Field {
            row,
            message: format!("total {:?} is not a number", &record[2]),
        })?;
        let errors: Option<f64> = if record[3].is_empty() {
            None
        } else {
            Some(record[3].parse().map_err(|_| CountsIoError::Field {
                row,
                message: format!("error {:?} is not a number", &record[3]),
            })?)
        };
        cells.push(((source, basis), CellCounts { total, errors }));
    }
    Ok(CountsTable::from_cells(cells)?)
}

/// Parse a counts table from a CSV file.
pub fn parse_counts(path: &Path) -> Result<CountsTable, CountsIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| CountsIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_counts_str(&text)
}

/// Render a counts table as CSV text (byte-stable given equal tables).
pub fn emit_counts(table: &CountsTable) -> String {
    let mut out = String::from(COUNTS_HEADER);
    out.push('\n');
    for ((source, basis), cell) in table.iter() {
        out.push_str(&format!("{source},{basis},{}", cell.total));
        out.push(',');
        if let Some(errors) = cell.errors {
            out.push_str(&format!("{errors}"));
        }
        out.push('\n');
    }
    out
}

/// Write a counts table to a CSV file.
pub fn write_counts(path: &Path, table: &CountsTable) -> Result<(), CountsIoError> {
    std::fs::write(path, emit_counts(table)).map_err(|source| CountsIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

//! Observed detection-count tables: one cell per (source, measured basis),
//! holding a total count and, where recorded, an error count.
//!
//! Counts may be fractional — run averages are means of integer counts and
//! every downstream formula is continuous in them.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Basis, Source, Variant};

/// Counts observed in one (source, measured basis) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCounts {
    /// Total detections attributed to the cell.
    pub total: f64,
    /// Error detections, when the cell's error is defined and recorded
    /// (matched-basis and vacuum cells).
    pub errors: Option<f64>,
}

/// Table of observed counts keyed by (source, measured basis).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountsTable {
    cells: BTreeMap<(Source, Basis), CellCounts>,
}

impl CountsTable {
    /// Empty table.
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a cell, rejecting duplicates, non-finite or negative counts,
    /// and error counts exceeding the total.
    pub fn insert(
        &mut self,
        source: Source,
        basis: Basis,
        counts: CellCounts,
    ) -> Result<(), CountsError> {
        if !counts.total.is_finite() || counts.total < 0.0 {
            return Err(CountsError::InvalidCount {
                src: source,
                basis,
                value: counts.total,
            });
        }
        if let Some(e) = counts.errors {
            if !e.is_finite() || e < 0.0 {
                return Err(CountsError::InvalidCount {
                    src: source,
                    basis,
                    value: e,
                });
            }
            if e > counts.total {
                return Err(CountsError::ErrorExceedsTotal {
                    src: source,
                    basis,
                    errors: e,
                    total: counts.total,
                });
            }
        }
        if self.cells.insert((source, basis), counts).is_some() {
            return Err(CountsError::DuplicateCell { src: source, basis });
        }
        Ok(())
    }

    /// The cell, if present.
    pub fn cell(&self, source: Source, basis: Basis) -> Option<CellCounts> {
        self.cells.get(&(source, basis)).copied()
    }

    /// Total count of a cell that must be present.
    pub fn total(&self, source: Source, basis: Basis) -> Result<f64, CountsError> {
        self.cell(source, basis)
            .map(|c| c.total)
            .ok_or(CountsError::MissingCell { src: source, basis })
    }

    /// Error count of a cell that must be present with errors recorded.
    pub fn errors(&self, source: Source, basis: Basis) -> Result<f64, CountsError> {
        self.cell(source, basis)
            .ok_or(CountsError::MissingCell { src: source, basis })?
            .errors
            .ok_or(CountsError::MissingErrors { src: source, basis })
    }

    /// Iterate cells in canonical (source, basis) order.
    pub fn iter(&self) -> impl Iterator<Item = ((Source, Basis), CellCounts)> + '_ {
        self.cells.iter().map(|(&k, &v)| (k, v))
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Whether the table has no cells.
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Check that every cell the variant's estimator consumes is present:
    /// totals for all eight pulsed (source × measured basis) cells, error
    /// counts for the four matched-basis cells, and — for the 3-intensity
    /// variants — totals for the two vacuum cells. Extra cells are allowed
    /// and ignored by the estimator.
    pub fn validate_for(&self, variant: Variant) -> Result<(), CountsError> {
        for source in Source::PULSED {
            for basis in Basis::ALL {
                self.total(source, basis)?;
            }
            let matched = source.basis().expect("pulsed sources carry a basis");
            self.errors(source, matched)?;
        }
        if variant.uses_vacuum_source() {
            for basis in Basis::ALL {
                self.total(Source::Vacuum, basis)?;
            }
        }
        Ok(())
    }
}

impl CountsTable {
    /// Build a table from (cell, counts) pairs, applying the same checks
    /// as [`CountsTable::insert`].
    pub fn from_cells<I>(cells: I) -> Result<CountsTable, CountsError>
    where
        I: IntoIterator<Item = ((Source, Basis), CellCounts)>,
    {
        let mut table = CountsTable::new();
        for ((source, basis), cell) in cells {
            table.insert(source, basis, cell)?;
        }
        Ok(table)
    }
}

/// Violations of the count-table invariants.
#[derive(Debug, Error)]
pub enum CountsError {
    /// The same (source, basis) cell appeared twice.
    #[error("duplicate cell {src},{basis}")]
    DuplicateCell {
        /// Source of the duplicate cell.
        src: Source,
        /// Measured basis of the duplicate cell.
        basis: Basis,
    },
    /// A required cell is absent.
    #[error("missing cell {src},{basis}")]
    MissingCell {
        /// Source of the missing cell.
        src: Source,
        /// Measured basis of the missing cell.
        basis: Basis,
    },
    /// A cell that must carry an error count has none.
    #[error("cell {src},{basis} has no error count (required for matched-basis cells)")]
    MissingErrors {
        /// Source of the cell.
        src: Source,
        /// Measured basis of the cell.
        basis: Basis,
    },
    /// A count is negative, NaN or infinite.
    #[error("cell {src},{basis} has invalid count {value}")]
    InvalidCount {
        /// Source of the cell.
        src: Source,
        /// Measured basis of the cell.
        basis: Basis,
        /// The rejected value.
        value: f64,
    },
    /// An error count exceeds its total.
    #[error("cell {src},{basis} has error count {errors} exceeding total {total}")]
    ErrorExceedsTotal {
        /// Source of the cell.
        src: Source,
        /// Measured basis of the cell.
        basis: Basis,
        /// Error count.
        errors: f64,
        /// Total count.
        total: f64,
    },
}

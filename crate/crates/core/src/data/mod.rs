//! Tabular data model, missingness bookkeeping, and file ingestion.

mod io;
mod matrix;
mod subset;

pub use io::{load_table, parse_table, render_table, write_table, Delimiter, TableFormat};
pub use matrix::{missing_profile, DataMatrix, MissingProfile, Table, VariableKind, VariableMeta};
pub use subset::{load_subsets, validate_subsets, SubsetFile, SubsetSpec};

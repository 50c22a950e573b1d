#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rrimpute::data::{load_table, Table, TableFormat};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn id_format() -> TableFormat {
    TableFormat { id_column: Some("id".into()), ..TableFormat::default() }
}

/// The seeded 400 x 20 block-missing table and its complete counterpart.
pub fn standard() -> (Table, Table) {
    let dir = fixtures().join("standard");
    let masked = load_table(&dir.join("masked.csv"), &id_format()).expect("masked fixture");
    let complete = load_table(&dir.join("complete.csv"), &id_format()).expect("complete fixture");
    (masked, complete)
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rrimpute")
}

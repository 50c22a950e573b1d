use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::{DataMatrix, Table, VariableMeta};
use crate::artifact::write_atomic;
use crate::error::{Error, Result};

/// Field separator of a delimited table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }

    /// Tab for `.tsv`/`.tab` paths, comma otherwise.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => Delimiter::Tab,
            _ => Delimiter::Comma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableFormat {
    pub delimiter: Delimiter,
    /// Token marking a missing cell, besides the empty string.
    pub missing_token: String,
    /// Column holding participant labels; row numbers are used when absent.
    pub id_column: Option<String>,
}

impl Default for TableFormat {
    fn default() -> Self {
        Self { delimiter: Delimiter::Comma, missing_token: "NA".to_string(), id_column: None }
    }
}

pub fn load_table(path: &Path, format: &TableFormat) -> Result<Table> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_table(&text, format)
}

/// Parses delimited text with a mandatory header row.
pub fn parse_table(text: &str, format: &TableFormat) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter.byte())
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate header `{h}`")));
        }
    }
    let id_col = match &format.id_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("id column `{name}` not in header")))?,
        ),
        None => None,
    };
    let data_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != id_col).collect();
    if data_cols.is_empty() {
        return Err(Error::Schema("no variable columns".into()));
    }

    let token = format.missing_token.trim();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record =
            record.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        match id_col {
            Some(c) => ids.push(record[c].trim().to_string()),
            None => ids.push(r.to_string()),
        }
        for &c in &data_cols {
            let cell = record[c].trim();
            if cell.is_empty() || cell == token {
                values.push(f64::NAN);
                mask.push(true);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
            mask.push(false);
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    if id_col.is_some() {
        let mut seen_ids = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen_ids.insert(id.as_str())) {
            return Err(Error::Schema(format!("duplicate participant id `{dup}`")));
        }
    }
    let vars = data_cols.iter().map(|&c| VariableMeta::continuous(header[c].clone())).collect();
    let data = DataMatrix::new(ids.len(), data_cols.len(), values, mask)?;
    Table::new(ids, vars, data)
}

/// Renders a table; the id column (when configured) comes first.
pub fn render_table(table: &Table, format: &TableFormat) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().delimiter(format.delimiter.byte()).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Schema(format!("cannot render table: {e}"));

    let mut header: Vec<&str> = Vec::with_capacity(table.vars.len() + 1);
    if let Some(id) = &format.id_column {
        header.push(id);
    }
    header.extend(table.vars.iter().map(|v| v.name.as_str()));
    writer.write_record(&header).map_err(csv_err)?;

    let mut row = Vec::with_capacity(header.len());
    for i in 0..table.data.n() {
        row.clear();
        if format.id_column.is_some() {
            row.push(table.ids[i].clone());
        }
        for j in 0..table.data.p() {
            row.push(match table.data.get(i, j) {
                Some(v) => format!("{v}"),
                None => format.missing_token.clone(),
            });
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Schema(format!("cannot render table: {e}")))
}

pub fn write_table(path: &Path, table: &Table, format: &TableFormat) -> Result<Vec<u8>> {
    let bytes = render_table(table, format)?;
    write_atomic(path, &bytes)?;
    Ok(bytes)
}

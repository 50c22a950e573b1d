use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `n x p` table of reals with an explicit missingness mask.
///
/// Masked cells hold a quiet NaN in the value buffer. Readers go through
/// [`DataMatrix::get`] (or check [`DataMatrix::is_missing`] first) so the
/// sentinel never reaches arithmetic.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
}

/// Equal when shapes and masks agree and observed cells are bitwise equal.
impl PartialEq for DataMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.p == other.p
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &m)| m || a.to_bits() == b.to_bits())
    }
}

impl DataMatrix {
    /// Builds a matrix from row-major values and mask. Masked positions are
    /// overwritten with the sentinel; observed positions must be finite.
    pub fn new(n: usize, p: usize, mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * p || mask.len() != n * p {
            return Err(Error::Schema(format!(
                "expected {} cells, got {} values and {} mask entries",
                n * p,
                values.len(),
                mask.len()
            )));
        }
        for (k, (v, &missing)) in values.iter_mut().zip(&mask).enumerate() {
            if missing {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite observed value at row {}, column {}",
                    k / p,
                    k % p
                )));
            }
        }
        Ok(Self { n, p, values, mask })
    }

    /// A matrix with no missing cells.
    pub fn complete(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        let mask = vec![false; values.len()];
        Self::new(n, p, values, mask)
    }

    /// Builds from rows of optional values; `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * p);
        let mut mask = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Schema(format!("row {i} has {} cells, expected {p}", row.len())));
            }
            for cell in row {
                values.push(cell.unwrap_or(f64::NAN));
                mask.push(cell.is_none());
            }
        }
        Self::new(n, p, values, mask)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.p + j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.p + j;
        (!self.mask[k]).then(|| self.values[k])
    }

    /// Raw row-major buffer. Masked cells are NaN.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Total number of missing cells, `m`.
    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Per-column missing counts `m_j`.
    pub fn column_missing_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.p];
        for row in self.mask.chunks_exact(self.p) {
            for (c, &missing) in counts.iter_mut().zip(row) {
                *c += usize::from(missing);
            }
        }
        counts
    }

    /// Row indices where column `j` is observed (the set `O_j`).
    pub fn observed_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.is_missing(i, j)).collect()
    }

    pub fn missing_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.is_missing(i, j)).collect()
    }

    pub fn observed_values(&self, j: usize) -> Vec<f64> {
        (0..self.n).filter_map(|i| self.get(i, j)).collect()
    }

    /// Copy of this matrix with cell `(i, j)` additionally masked.
    pub fn with_masked(&self, i: usize, j: usize) -> Self {
        let mut out = self.clone();
        let k = i * self.p + j;
        out.mask[k] = true;
        out.values[k] = f64::NAN;
        out
    }

    /// Copy with every cell observed, taking masked cells from `fill`.
    pub(crate) fn filled_from(&self, fill: &[f64]) -> Self {
        debug_assert_eq!(fill.len(), self.values.len());
        Self { n: self.n, p: self.p, values: fill.to_vec(), mask: vec![false; fill.len()] }
    }

    /// Keeps the given rows (in order) and columns (in order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        let mut mask = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                let k = i * self.p + j;
                values.push(self.values[k]);
                mask.push(self.mask[k]);
            }
        }
        Self::new(rows.len(), cols.len(), values, mask)
    }
}

/// Kind of a variable; drives post-imputation snapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    #[default]
    Continuous,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    #[serde(default)]
    pub kind: VariableKind,
    /// When false the variable is never a regression input, though it may
    /// still be imputed.
    #[serde(default = "default_true")]
    pub predictor_allowed: bool,
}

fn default_true() -> bool {
    true
}

impl VariableMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VariableKind::Continuous, predictor_allowed: true }
    }

    /// Default metadata `v0, v1, ...` for a matrix without a header.
    pub fn defaults(p: usize) -> Vec<Self> {
        (0..p).map(|j| Self::continuous(format!("v{j}"))).collect()
    }
}

/// Per-variable and per-participant missing counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MissingProfile {
    pub per_variable: Vec<usize>,
    pub per_participant: Vec<usize>,
}

pub fn missing_profile(data: &DataMatrix) -> MissingProfile {
    let per_variable = data.column_missing_counts();
    let per_participant =
        data.mask().chunks_exact(data.p()).map(|row| row.iter().filter(|&&b| b).count()).collect();
    MissingProfile { per_variable, per_participant }
}

/// A matrix together with its row labels and column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub ids: Vec<String>,
    pub vars: Vec<VariableMeta>,
    pub data: DataMatrix,
}

impl Table {
    pub fn new(ids: Vec<String>, vars: Vec<VariableMeta>, data: DataMatrix) -> Result<Self> {
        if ids.len() != data.n() {
            return Err(Error::Schema(format!("{} row labels for {} rows", ids.len(), data.n())));
        }
        if vars.len() != data.p() {
            return Err(Error::Schema(format!("{} variable names for {} columns", vars.len(), data.p())));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &vars {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(Self { ids, vars, data })
    }

    /// Wraps a bare matrix with `0..n` row labels and `v0..` variable names.
    pub fn from_matrix(data: DataMatrix) -> Self {
        Self {
            ids: (0..data.n()).map(|i| i.to_string()).collect(),
            vars: VariableMeta::defaults(data.p()),
            data,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }
}

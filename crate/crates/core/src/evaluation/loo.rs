use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Flag, Imputer, RoundRobinImputer};
use crate::data::{DataMatrix, VariableMeta};
use crate::error::{Error, Result};
use crate::regressors::RegressorSpec;
use crate::roundrobin::RoundRobinConfig;
use crate::{rng, stats};

const DENOMINATOR_FLOOR: f64 = 1e-12;

/// How many observed cells per variable are held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    All,
    /// A seeded uniform sample of at most this many cells.
    PerVariable(usize),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::PerVariable(30)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LooConfig {
    pub sample: Sampling,
    /// Seed of the per-variable cell samples.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellError {
    pub row: usize,
    pub truth: f64,
    pub imputed: f64,
    pub error: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableLoo {
    pub variable: String,
    /// Mean relative error over the evaluated cells; absent when skipped.
    pub mre: Option<f64>,
    pub denominator: f64,
    pub available: usize,
    pub cells: Vec<CellError>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooResult {
    pub variables: Vec<VariableLoo>,
}

impl LooResult {
    pub fn mre(&self) -> Vec<Option<f64>> {
        self.variables.iter().map(|v| v.mre).collect()
    }
}

/// Divides by `denominator`, which the caller picked with its fallbacks.
pub fn relative_error(error: f64, denominator: f64) -> f64 {
    error / denominator
}

/// Observed mean, else mean absolute value, else 1 (raw error).
fn denominator(observed: &[f64]) -> (f64, Option<Flag>) {
    let m = stats::mean(observed);
    if m.abs() >= DENOMINATOR_FLOOR {
        return (m, None);
    }
    let abs: Vec<f64> = observed.iter().map(|v| v.abs()).collect();
    let a = stats::mean(&abs);
    if a >= DENOMINATOR_FLOOR {
        (a, Some(Flag::AbsMeanDenominator))
    } else {
        (1.0, Some(Flag::RawErrorDenominator))
    }
}

/// Leave-one-observation-out relative error with the round-robin engine.
pub fn loo_mre(
    data: &DataMatrix,
    spec: &RegressorSpec,
    vars: &[VariableMeta],
    rr: &RoundRobinConfig,
    cfg: &LooConfig,
) -> Result<LooResult> {
    let imputer = RoundRobinImputer { spec, vars, config: rr };
    loo_mre_with(data, vars, &imputer, cfg)
}

/// Masks each evaluated observed cell in turn, imputes the whole matrix, and
/// scores the recovered value against the truth.
pub fn loo_mre_with(
    data: &DataMatrix,
    vars: &[VariableMeta],
    imputer: &dyn Imputer,
    cfg: &LooConfig,
) -> Result<LooResult> {
    if vars.len() != data.p() {
        return Err(Error::Schema(format!("{} variable descriptors for {} columns", vars.len(), data.p())));
    }
    if cfg.sample == Sampling::PerVariable(0) {
        return Err(Error::Config("sample_per_variable must be >= 1".into()));
    }

    let mut tasks = Vec::new();
    let mut variables = Vec::with_capacity(data.p());
    for (j, var) in vars.iter().enumerate() {
        let rows = data.observed_rows(j);
        let (denom, flag) = denominator(&data.observed_values(j));
        let mut entry = VariableLoo {
            variable: var.name.clone(),
            mre: None,
            denominator: denom,
            available: rows.len(),
            cells: Vec::new(),
            flags: flag.into_iter().collect(),
        };
        if rows.len() < 2 {
            entry.flags = vec![Flag::TooFewObserved];
            variables.push(entry);
            continue;
        }
        let picked = match cfg.sample {
            Sampling::PerVariable(k) if k < rows.len() => {
                let mut r = rng::stream(cfg.seed, j as u64);
                let mut idx = index::sample(&mut r, rows.len(), k).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|k| rows[k]).collect()
            }
            _ => rows,
        };
        tasks.extend(picked.into_iter().map(|i| (j, i)));
        variables.push(entry);
    }

    let outcomes: Vec<(usize, CellError)> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let truth = data.get(i, j).expect("evaluated cells are observed");
            let imputed = imputer
                .impute(&data.with_masked(i, j))?
                .get(i, j)
                .ok_or_else(|| Error::Contract("imputer left a cell missing".into()))?;
            let error = (truth - imputed).abs();
            let relative = relative_error(error, variables[j].denominator);
            Ok((j, CellError { row: i, truth, imputed, error, relative }))
        })
        .collect::<Result<_>>()?;

    for (j, cell) in outcomes {
        variables[j].cells.push(cell);
    }
    for v in &mut variables {
        if !v.cells.is_empty() {
            let rel: Vec<f64> = v.cells.iter().map(|c| c.relative).collect();
            v.mre = Some(stats::mean(&rel));
        }
    }
    Ok(LooResult { variables })
}

//! Iterative chained-equations engine.
//!
//! Missing cells start at their column's observed mean. Each round visits the
//! variables in order; a variable with missing cells is regressed on the
//! current working values of every other predictor-eligible variable and its
//! missing cells are overwritten in place, so later variables in the same
//! round already see the update. Rounds stop once the largest standardized
//! change of any imputed cell is within tolerance, or at the round cap.

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, VariableKind, VariableMeta};
use crate::error::{Error, Result};
use crate::regressors::{fit, Matrix, RegressorSpec};
use crate::{rng, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderDirection {
    #[default]
    Ascending,
    Descending,
}

impl std::str::FromStr for OrderDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" | "asc" => Ok(Self::Ascending),
            "descending" | "desc" => Ok(Self::Descending),
            _ => Err(Error::Config(format!("unknown order `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundRobinConfig {
    pub max_rounds: usize,
    /// Convergence threshold on the max standardized change. Zero disables
    /// early stopping.
    pub tol: f64,
    pub order: OrderDirection,
}

impl Default for RoundRobinConfig {
    fn default() -> Self {
        Self { max_rounds: 100, tol: 1e-3, order: OrderDirection::Ascending }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    /// Fully observed matrix; original observations are untouched.
    pub imputed: DataMatrix,
    pub rounds_used: usize,
    pub per_round_delta: Vec<f64>,
    pub order: Vec<usize>,
    pub seed: u64,
}

/// Replaces each missing cell with its column's observed mean.
pub fn initial_fill(data: &DataMatrix) -> Result<DataMatrix> {
    let (work, _) = mean_filled(data, None)?;
    Ok(data.filled_from(&work))
}

fn mean_filled(data: &DataMatrix, vars: Option<&[VariableMeta]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, p) = (data.n(), data.p());
    let mut work = data.raw_values().to_vec();
    let mut means = Vec::with_capacity(p);
    for j in 0..p {
        let observed = data.observed_values(j);
        if observed.is_empty() {
            let name = vars.map_or_else(|| format!("#{j}"), |v| v[j].name.clone());
            return Err(Error::UnimputableColumn(name));
        }
        let m = stats::mean(&observed);
        for i in 0..n {
            if data.is_missing(i, j) {
                work[i * p + j] = m;
            }
        }
        means.push(m);
    }
    Ok((work, means))
}

/// Column permutation sorted by missing count; ties keep column order.
pub fn variable_order(data: &DataMatrix, direction: OrderDirection) -> Vec<usize> {
    let counts = data.column_missing_counts();
    let mut order: Vec<usize> = (0..data.p()).collect();
    match direction {
        OrderDirection::Ascending => order.sort_by_key(|&j| counts[j]),
        OrderDirection::Descending => order.sort_by_key(|&j| std::cmp::Reverse(counts[j])),
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    pub delta: f64,
}

/// Largest `|curr - prev| / scale_j` over the cells masked in `original`.
/// Converged when that value is at most `tol`.
pub fn converged(original: &DataMatrix, prev: &[f64], curr: &[f64], scale: &[f64], tol: f64) -> Convergence {
    let p = original.p();
    let delta = original
        .mask()
        .iter()
        .enumerate()
        .filter(|(_, &missing)| missing)
        .map(|(k, _)| (curr[k] - prev[k]).abs() / scale[k % p])
        .fold(0.0, f64::max);
    Convergence { converged: delta <= tol, delta }
}

/// Per-column observed standard deviation, 1 where it is zero.
pub fn column_scales(data: &DataMatrix) -> Vec<f64> {
    (0..data.p())
        .map(|j| match stats::pop_std(&data.observed_values(j)) {
            s if s > 0.0 => s,
            _ => 1.0,
        })
        .collect()
}

/// Seed of the regressor that imputes variable `j`; fixed across rounds.
fn variable_seed(seed: u64, j: usize) -> u64 {
    rng::mix(seed ^ rng::mix(j as u64 + 1))
}

struct Engine<'a> {
    data: &'a DataMatrix,
    spec: &'a RegressorSpec,
    vars: &'a [VariableMeta],
    predictors: Vec<Vec<usize>>,
    observed: Vec<Vec<usize>>,
    missing: Vec<Vec<usize>>,
}

impl Engine<'_> {
    fn features(&self, work: &[f64], rows: &[usize], cols: &[usize]) -> Matrix {
        let p = self.data.p();
        let mut buf = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            buf.extend(cols.iter().map(|&c| work[i * p + c]));
        }
        Matrix::new(rows.len(), cols.len(), buf).expect("sized buffer")
    }

    /// Re-imputes variable `j` in place.
    fn update(&self, work: &mut [f64], j: usize, round: usize) -> Result<()> {
        let p = self.data.p();
        let missing = &self.missing[j];
        if missing.is_empty() {
            return Ok(());
        }
        let observed = &self.observed[j];
        let y: Vec<f64> = observed.iter().map(|&i| work[i * p + j]).collect();
        let (x_train, x_query) = if self.spec.strategy.is_univariate() {
            (Matrix::empty(observed.len()), Matrix::empty(missing.len()))
        } else {
            (
                self.features(work, observed, &self.predictors[j]),
                self.features(work, missing, &self.predictors[j]),
            )
        };
        let tag =
            |e: Error| Error::Regressor { round, variable: self.vars[j].name.clone(), source: Box::new(e) };
        let spec = self.spec.with_seed(variable_seed(self.spec.seed, j));
        let model = fit(&spec, &x_train, &y).map_err(tag)?;
        let pred = model.predict(&x_query).map_err(tag)?;
        for (&i, v) in missing.iter().zip(pred) {
            work[i * p + j] = v;
        }
        Ok(())
    }
}

/// Runs round-robin imputation of `data` with one regressor for every variable.
pub fn run(
    data: &DataMatrix,
    spec: &RegressorSpec,
    vars: &[VariableMeta],
    cfg: &RoundRobinConfig,
) -> Result<ImputationResult> {
    if vars.len() != data.p() {
        return Err(Error::Schema(format!("{} variable descriptors for {} columns", vars.len(), data.p())));
    }
    if cfg.max_rounds == 0 {
        return Err(Error::Config("max_rounds must be >= 1".into()));
    }
    if cfg.tol.is_nan() || cfg.tol < 0.0 {
        return Err(Error::Config("tol must be >= 0".into()));
    }
    spec.validate()?;

    let p = data.p();
    let (mut work, _) = mean_filled(data, Some(vars))?;
    let order = variable_order(data, cfg.order);
    if data.missing_count() == 0 {
        return Ok(ImputationResult {
            imputed: data.clone(),
            rounds_used: 1,
            per_round_delta: vec![0.0],
            order,
            seed: spec.seed,
        });
    }

    let engine = Engine {
        data,
        spec,
        vars,
        predictors: (0..p)
            .map(|j| (0..p).filter(|&k| k != j && vars[k].predictor_allowed).collect())
            .collect(),
        observed: (0..p).map(|j| data.observed_rows(j)).collect(),
        missing: (0..p).map(|j| data.missing_rows(j)).collect(),
    };
    let scale = column_scales(data);

    let mut deltas = Vec::new();
    for round in 1..=cfg.max_rounds {
        let prev = work.clone();
        for &j in &order {
            engine.update(&mut work, j, round)?;
        }
        let c = converged(data, &prev, &work, &scale, cfg.tol);
        deltas.push(c.delta);
        if cfg.tol > 0.0 && c.converged {
            break;
        }
    }

    snap_kinds(data, vars, &mut work);
    Ok(ImputationResult {
        imputed: data.filled_from(&work),
        rounds_used: deltas.len(),
        per_round_delta: deltas,
        order,
        seed: spec.seed,
    })
}

/// Rounds integer columns and snaps categorical columns to the nearest
/// observed level, at imputed cells only.
fn snap_kinds(data: &DataMatrix, vars: &[VariableMeta], work: &mut [f64]) {
    let p = data.p();
    for (j, var) in vars.iter().enumerate() {
        let levels = match var.kind {
            VariableKind::Continuous => continue,
            VariableKind::Integer => None,
            VariableKind::Categorical => {
                let mut lv = data.observed_values(j);
                lv.sort_by(f64::total_cmp);
                lv.dedup();
                Some(lv)
            }
        };
        for i in data.missing_rows(j) {
            let v = &mut work[i * p + j];
            *v = match &levels {
                None => v.round(),
                Some(lv) => nearest_level(lv, *v),
            };
        }
    }
}

/// Closest entry of sorted `levels`; the lower level wins an exact tie.
fn nearest_level(levels: &[f64], v: f64) -> f64 {
    let k = levels.partition_point(|&l| l < v);
    match (k.checked_sub(1).map(|i| levels[i]), levels.get(k)) {
        (Some(lo), Some(&hi)) => {
            if v - lo <= hi - v {
                lo
            } else {
                hi
            }
        }
        (Some(lo), None) => lo,
        (None, Some(&hi)) => hi,
        (None, None) => v,
    }
}

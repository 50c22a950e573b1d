//! The six imputation strategies behind one fit/predict surface.
//!
//! Mean and Median ignore the features. Bayesian ridge, CART, extra trees and
//! k-nearest neighbours regress the target on the features they are given.

mod bayes_ridge;
mod knn;
mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use bayes_ridge::{BayesRidgeModel, BayesRidgeParams, EvidenceState};
pub use knn::{KnnModel, KnnParams};
pub use tree::{ExtraTreesParams, SplitMode, Tree, TreeParams};

use crate::error::{Error, Result};
use crate::{rng, stats};

/// Row-major dense feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Schema(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Schema("ragged feature rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// `rows x 0` matrix, for strategies that need no features.
    pub fn empty(rows: usize) -> Self {
        Self { rows, cols: 0, data: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column-major copy: `out[j][i] = self[i][j]`.
    pub(crate) fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.at(i, j)).collect()).collect()
    }
}

/// Strategy identifier with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "params", rename_all = "snake_case")]
pub enum Strategy {
    Mean,
    Median,
    #[serde(alias = "br")]
    BayesianRidge(BayesRidgeParams),
    #[serde(alias = "dt")]
    DecisionTree(TreeParams),
    #[serde(alias = "et")]
    ExtraTrees(ExtraTreesParams),
    #[serde(alias = "knn", alias = "k_neighbors")]
    KNeighbours(KnnParams),
}

impl Strategy {
    /// Default-parameter strategy for a name or short alias.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "mean" => Strategy::Mean,
            "median" => Strategy::Median,
            "br" | "bayesian_ridge" => Strategy::BayesianRidge(Default::default()),
            "dt" | "decision_tree" => Strategy::DecisionTree(Default::default()),
            "et" | "extra_trees" => Strategy::ExtraTrees(Default::default()),
            "knn" | "k_neighbours" | "k_neighbors" => Strategy::KNeighbours(Default::default()),
            other => return Err(Error::Config(format!("unknown regressor `{other}`"))),
        })
    }

    /// Short label used in reports.
    pub fn short_name(&self) -> &'static str {
        match self {
            Strategy::Mean => "mean",
            Strategy::Median => "median",
            Strategy::BayesianRidge(_) => "br",
            Strategy::DecisionTree(_) => "dt",
            Strategy::ExtraTrees(_) => "et",
            Strategy::KNeighbours(_) => "knn",
        }
    }

    pub fn is_univariate(&self) -> bool {
        matches!(self, Strategy::Mean | Strategy::Median)
    }

    /// Strategies whose fitted state may depend on the seed.
    pub fn seed_sensitive(&self) -> bool {
        matches!(self, Strategy::DecisionTree(_) | Strategy::ExtraTrees(_))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct RegressorSpec {
    #[serde(flatten)]
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
}

/// Serialized form. `strategy` accepts any name [`Strategy::from_name`]
/// does, and `params` may be partial or absent.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    strategy: String,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawSpec> for RegressorSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let strategy = Strategy::from_name(&raw.strategy)?;
        let strategy = match raw.params {
            None => strategy,
            Some(params) => {
                let mut value = serde_json::to_value(&strategy)?;
                value["params"] = params;
                serde_json::from_value(value)
                    .map_err(|e| Error::Config(format!("regressor `{}`: {e}", raw.strategy)))?
            }
        };
        Ok(Self::new(strategy, raw.seed))
    }
}

impl RegressorSpec {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self { strategy, seed }
    }

    /// Default hyperparameters for `name`, seed 0.
    pub fn named(name: &str) -> Result<Self> {
        Ok(Self::new(Strategy::from_name(name)?, 0))
    }

    /// Builds a spec from a strategy name and textual `key=value` overrides.
    /// Keys outside the strategy's hyperparameter set are rejected.
    pub fn from_pairs(name: &str, pairs: &BTreeMap<String, String>, seed: u64) -> Result<Self> {
        Self::new(Strategy::from_name(name)?, seed).with_params(pairs)
    }

    /// Copy with textual `key=value` hyperparameter overrides applied.
    pub fn with_params(&self, pairs: &BTreeMap<String, String>) -> Result<Self> {
        let name = self.strategy.short_name();
        let mut value = serde_json::to_value(self)?;
        if !pairs.is_empty() {
            let params = value
                .as_object_mut()
                .expect("spec serializes to an object")
                .entry("params")
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            let obj = params
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("strategy `{name}` takes no hyperparameters")))?;
            for (k, v) in pairs {
                if !obj.contains_key(k) {
                    return Err(Error::Config(format!("unknown hyperparameter `{k}` for `{name}`")));
                }
                obj.insert(k.clone(), parse_scalar(v));
            }
        }
        let spec: RegressorSpec =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("regressor `{name}`: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Report label: the short name, followed by any hyperparameters that
    /// differ from the defaults, e.g. `et[min_samples_leaf=2,n_trees=20]`.
    pub fn label(&self) -> String {
        let name = self.strategy.short_name();
        let params = |s: &Strategy| {
            serde_json::to_value(s).ok().and_then(|mut v| v.get_mut("params").map(|p| p.take()))
        };
        let (Some(serde_json::Value::Object(mine)), Some(serde_json::Value::Object(defaults))) =
            (params(&self.strategy), Strategy::from_name(name).ok().as_ref().and_then(params))
        else {
            return name.to_string();
        };
        let changed: Vec<String> = mine
            .iter()
            .filter(|(k, v)| defaults.get(*k) != Some(v))
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if changed.is_empty() {
            name.to_string()
        } else {
            format!("{name}[{}]", changed.join(","))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match &self.strategy {
            Strategy::Mean | Strategy::Median => Ok(()),
            Strategy::BayesianRidge(p) => {
                if p.max_iter == 0 {
                    return bad("bayesian_ridge.max_iter must be >= 1");
                }
                let positive = [
                    p.tol,
                    p.weight_precision_shape,
                    p.weight_precision_rate,
                    p.noise_precision_shape,
                    p.noise_precision_rate,
                ];
                if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return bad("bayesian_ridge tolerance and hyperprior values must be > 0");
                }
                Ok(())
            }
            Strategy::DecisionTree(p) => p.validate(),
            Strategy::ExtraTrees(p) => {
                if p.n_trees == 0 {
                    return bad("extra_trees.n_trees must be >= 1");
                }
                p.tree_params().validate()
            }
            Strategy::KNeighbours(p) => {
                if p.k == 0 {
                    return bad("k_neighbours.k must be >= 1");
                }
                Ok(())
            }
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { strategy: self.strategy.clone(), seed }
    }
}

fn parse_scalar(s: &str) -> serde_json::Value {
    let s = s.trim();
    if let Ok(i) = s.parse::<u64>() {
        return i.into();
    }
    if let Ok(f) = s.parse::<f64>() {
        return f.into();
    }
    match s {
        "true" => true.into(),
        "false" => false.into(),
        "none" | "null" => serde_json::Value::Null,
        _ => s.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    /// Same value for every query (Mean, Median, and degenerate targets).
    Constant(f64),
    BayesRidge(BayesRidgeModel),
    Forest(Vec<Tree>),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: RegressorSpec,
    pub n_features: usize,
    pub state: ModelState,
    y_range: (f64, f64),
}

/// Fits `spec` to features `x` and target `y`.
pub fn fit(spec: &RegressorSpec, x: &Matrix, y: &[f64]) -> Result<FittedModel> {
    if y.is_empty() || x.rows() == 0 {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Schema(format!("{} feature rows for {} targets", x.rows(), y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite training target".into()));
    }
    if !spec.strategy.is_univariate() && x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite training feature".into()));
    }
    let y_range = stats::min_max(y);
    let constant = y_range.0 == y_range.1;
    let state = match &spec.strategy {
        Strategy::Mean => ModelState::Constant(stats::mean(y)),
        Strategy::Median => ModelState::Constant(stats::median(y)),
        _ if constant => ModelState::Constant(y[0]),
        Strategy::BayesianRidge(p) => ModelState::BayesRidge(BayesRidgeModel::fit(p, x, y)?),
        Strategy::DecisionTree(p) => ModelState::Forest(vec![Tree::fit(x, y, p, SplitMode::Best, spec.seed)]),
        Strategy::ExtraTrees(p) => {
            let tp = p.tree_params();
            let trees = (0..p.n_trees)
                .map(|t| Tree::fit(x, y, &tp, p.split_mode, rng::mix(spec.seed ^ rng::mix(t as u64))))
                .collect();
            ModelState::Forest(trees)
        }
        Strategy::KNeighbours(p) => ModelState::Knn(KnnModel::fit(p, x, y)),
    };
    Ok(FittedModel { spec: spec.clone(), n_features: x.cols(), state, y_range })
}

impl FittedModel {
    pub fn predict(&self, xq: &Matrix) -> Result<Vec<f64>> {
        let univariate = matches!(self.state, ModelState::Constant(_));
        if !univariate && xq.cols() != self.n_features {
            return Err(Error::Shape { expected: self.n_features, got: xq.cols() });
        }
        if !univariate && xq.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite query feature".into()));
        }
        let (lo, hi) = self.y_range;
        Ok(match &self.state {
            ModelState::Constant(c) => vec![*c; xq.rows()],
            ModelState::BayesRidge(m) => (0..xq.rows()).map(|i| m.predict_row(xq.row(i))).collect(),
            ModelState::Forest(trees) => (0..xq.rows())
                .map(|i| {
                    let row = xq.row(i);
                    let sum: f64 = trees.iter().map(|t| t.predict_row(row)).sum();
                    (sum / trees.len() as f64).clamp(lo, hi)
                })
                .collect(),
            ModelState::Knn(m) => (0..xq.rows()).map(|i| m.predict_row(xq.row(i))).collect(),
        })
    }
}

/// Convenience wrapper matching [`FittedModel::predict`].
pub fn predict(model: &FittedModel, xq: &Matrix) -> Result<Vec<f64>> {
    model.predict(xq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(xs: &[f64]) -> Matrix {
        Matrix::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn labels_list_non_default_params() {
        assert_eq!(RegressorSpec::named("mean").unwrap().label(), "mean");
        assert_eq!(RegressorSpec::named("et").unwrap().with_seed(9).label(), "et");
        let pairs = [("n_trees".to_string(), "20".to_string())].into();
        assert_eq!(RegressorSpec::from_pairs("et", &pairs, 0).unwrap().label(), "et[n_trees=20]");
    }

    #[test]
    fn specs_accept_aliases_and_partial_params() {
        let spec: RegressorSpec = serde_json::from_str(r#"{"strategy": "et"}"#).unwrap();
        assert_eq!(spec, RegressorSpec::named("et").unwrap());
        let spec: RegressorSpec =
            serde_json::from_str(r#"{"strategy": "knn", "params": {"k": 3}, "seed": 4}"#).unwrap();
        assert_eq!(spec, RegressorSpec::from_pairs("knn", &[("k".into(), "3".into())].into(), 4).unwrap());
        assert!(serde_json::from_str::<RegressorSpec>(r#"{"strategy": "knn", "params": {"kk": 3}}"#).is_err());
        assert!(serde_json::from_str::<RegressorSpec>(r#"{"strategy": "svm"}"#).is_err());
        let round = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<RegressorSpec>(&round).unwrap(), spec);
    }

    #[test]
    fn mean_and_median_are_constant() {
        let x = col(&[5.0, -1.0, 7.0]);
        let m = fit(&RegressorSpec::named("mean").unwrap(), &x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.predict(&col(&[100.0, -3.0])).unwrap(), vec![2.0, 2.0]);
        let m = fit(&RegressorSpec::named("median").unwrap(), &x, &[1.0, 2.0, 100.0]).unwrap();
        assert_eq!(m.predict(&Matrix::empty(2)).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn knn_nearest_point() {
        let spec = RegressorSpec::from_pairs("knn", &BTreeMap::from([("k".to_string(), "1".to_string())]), 0)
            .unwrap();
        let m = fit(&spec, &col(&[0.0, 10.0]), &[5.0, 7.0]).unwrap();
        assert_eq!(m.predict(&col(&[9.0])).unwrap(), vec![7.0]);
    }

    #[test]
    fn decision_tree_single_split() {
        let spec = RegressorSpec::named("dt").unwrap();
        let m = fit(&spec, &col(&[0.0, 0.0, 1.0, 1.0]), &[2.0, 2.0, 8.0, 8.0]).unwrap();
        assert_eq!(m.predict(&col(&[1.0])).unwrap(), vec![8.0]);
        assert_eq!(m.predict(&col(&[0.0])).unwrap(), vec![2.0]);
    }

    #[test]
    fn extra_trees_constant_target() {
        let spec = RegressorSpec::named("et").unwrap();
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]]).unwrap();
        let m = fit(&spec, &x, &[0.1, 0.1, 0.1]).unwrap();
        let q = Matrix::from_rows(&[vec![9.0, 9.0], vec![-5.0, 0.3]]).unwrap();
        assert_eq!(m.predict(&q).unwrap(), vec![0.1, 0.1]);
    }

    #[test]
    fn single_row_returns_its_target() {
        for name in ["mean", "median", "br", "dt", "et", "knn"] {
            let m = fit(&RegressorSpec::named(name).unwrap(), &col(&[3.0]), &[4.5]).unwrap();
            assert_eq!(m.predict(&col(&[-2.0])).unwrap(), vec![4.5], "{name}");
        }
    }

    #[test]
    fn errors() {
        let spec = RegressorSpec::named("br").unwrap();
        assert_eq!(fit(&spec, &Matrix::empty(0), &[]).unwrap_err().kind(), "insufficient_data");
        assert_eq!(fit(&spec, &col(&[f64::NAN]), &[1.0]).unwrap_err().kind(), "numeric");
        let m = fit(&spec, &col(&[1.0, 2.0]), &[1.0, 2.0]).unwrap();
        assert_eq!(m.predict(&Matrix::empty(1)).unwrap_err().kind(), "shape");
    }

    #[test]
    fn hyperparameter_keys_are_closed() {
        let pairs = BTreeMap::from([("depth".to_string(), "3".to_string())]);
        assert_eq!(RegressorSpec::from_pairs("et", &pairs, 0).unwrap_err().kind(), "config");
        let pairs = BTreeMap::from([("n_trees".to_string(), "0".to_string())]);
        assert!(RegressorSpec::from_pairs("et", &pairs, 0).is_err());
        let pairs = BTreeMap::from([("k".to_string(), "2".to_string())]);
        assert!(RegressorSpec::from_pairs("mean", &pairs, 0).is_err());
        let pairs = BTreeMap::from([("tol".to_string(), "-1".to_string())]);
        assert!(RegressorSpec::from_pairs("br", &pairs, 0).is_err());
    }

    #[test]
    fn serde_shape_is_flat() {
        let spec = RegressorSpec::new(Strategy::ExtraTrees(Default::default()), 9);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v["strategy"], "extra_trees");
        assert_eq!(v["params"]["n_trees"], 10);
        assert_eq!(v["seed"], 9);
        let back: RegressorSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
        let mean: RegressorSpec = serde_json::from_str(r#"{"strategy":"mean"}"#).unwrap();
        assert_eq!(mean.strategy, Strategy::Mean);
        let bad = serde_json::from_str::<RegressorSpec>(
            r#"{"strategy":"knn","params":{"k":3,"weights":"distance"}}"#,
        );
        assert!(bad.is_err());
    }
}

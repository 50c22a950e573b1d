//! Imputation quality: leave-one-out relative error, observed-versus-imputed
//! divergence, the plane relative to mean imputation, paired significance
//! tests, and spread across seeds.

mod kl;
mod loo;
mod plane;
mod report;
mod stability;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, VariableMeta};
use crate::error::Result;
use crate::regressors::RegressorSpec;
use crate::roundrobin::{self, RoundRobinConfig};

pub use kl::{divergence, kl_per_variable, BinningPolicy, Bins, MAX_BINS, MIN_BINS, SMOOTHING};
pub use loo::{
    loo_mre, loo_mre_with, relative_error, CellError, LooConfig, LooResult, Sampling, VariableLoo,
};
pub use plane::{combined_norm, relative_plane, ModelMetrics, ModelPlane, RelPoint};
pub use report::{
    evaluate, long_table, EvalSettings, EvaluationReport, ModelReport, PairedTest, Summary, VariableReport,
};
pub use stability::{seed_stability, CellSpread, StabilityReport};
pub use ttest::{paired_t_test, TTest};

/// Conditions attached to a variable's metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Fewer than two observed values; relative error not evaluated.
    TooFewObserved,
    /// Observed mean is ~0; relative error divides by the mean absolute value.
    AbsMeanDenominator,
    /// Column is all zero; relative error is the raw absolute error.
    RawErrorDenominator,
    /// Nothing was imputed; the divergence is defined as 0.
    NoImputedValues,
    /// Baseline error is 0; relative error excluded from summaries.
    ZeroBaselineMre,
    /// Baseline divergence is 0; relative divergence excluded from summaries.
    ZeroBaselineKl,
}

/// Anything that turns a masked matrix into a complete one.
pub trait Imputer: Sync {
    fn impute(&self, data: &DataMatrix) -> Result<DataMatrix>;
}

/// The round-robin engine with a fixed regressor and settings.
#[derive(Debug, Clone)]
pub struct RoundRobinImputer<'a> {
    pub spec: &'a RegressorSpec,
    pub vars: &'a [VariableMeta],
    pub config: &'a RoundRobinConfig,
}

impl Imputer for RoundRobinImputer<'_> {
    fn impute(&self, data: &DataMatrix) -> Result<DataMatrix> {
        Ok(roundrobin::run(data, self.spec, self.vars, self.config)?.imputed)
    }
}

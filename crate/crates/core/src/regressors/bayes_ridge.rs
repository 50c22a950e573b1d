//! Bayesian linear regression with Gamma hyperpriors on the weight precision
//! (alpha) and the noise precision (beta), fitted by evidence maximization.
//!
//! Features and target are standardized before fitting; predictions are
//! mapped back to the target's units.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesRidgeParams {
    pub max_iter: usize,
    /// Stop once the largest absolute weight change falls below this.
    pub tol: f64,
    pub weight_precision_shape: f64,
    pub weight_precision_rate: f64,
    pub noise_precision_shape: f64,
    pub noise_precision_rate: f64,
}

impl Default for BayesRidgeParams {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-3,
            weight_precision_shape: 1e-6,
            weight_precision_rate: 1e-6,
            noise_precision_shape: 1e-6,
            noise_precision_rate: 1e-6,
        }
    }
}

/// Hyperparameter state of the evidence iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceState {
    /// Weight precision.
    pub alpha: f64,
    /// Noise precision.
    pub beta: f64,
    /// Effective number of well-determined parameters.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesRidgeModel {
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    /// Posterior mean weights in standardized units.
    weights: Vec<f64>,
    pub state: EvidenceState,
    pub iterations: usize,
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Solves `(beta * XtX + alpha * I) w = beta * Xty`, adding a doubling diagonal
/// jitter when the Cholesky factorization fails.
fn posterior_mean(xtx: &DMatrix<f64>, xty: &DVector<f64>, st: &EvidenceState) -> Result<DVector<f64>> {
    let d = xtx.nrows();
    let base = xtx * st.beta + DMatrix::identity(d, d) * st.alpha;
    let rhs = xty * st.beta;
    if let Some(ch) = base.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX {
        let a = &base + DMatrix::identity(d, d) * jitter;
        if let Some(ch) = a.cholesky() {
            return Ok(ch.solve(&rhs));
        }
        jitter *= 2.0;
    }
    Err(Error::Numeric("bayesian ridge normal system is singular beyond jitter 1e-6".into()))
}

/// One evidence-maximization update of `(alpha, beta)` from the current
/// posterior mean `w`, residual sum of squares `rss`, the eigenvalues of
/// `XtX`, and `n` training rows.
pub(crate) fn hyperupdate(
    params: &BayesRidgeParams,
    st: &EvidenceState,
    w: &DVector<f64>,
    rss: f64,
    eigenvalues: &[f64],
    n: usize,
) -> EvidenceState {
    let gamma: f64 = eigenvalues.iter().map(|&l| st.beta * l / (st.beta * l + st.alpha)).sum();
    let alpha = (gamma + 2.0 * params.weight_precision_shape)
        / (w.norm_squared() + 2.0 * params.weight_precision_rate);
    let beta =
        (n as f64 - gamma + 2.0 * params.noise_precision_shape) / (rss + 2.0 * params.noise_precision_rate);
    EvidenceState { alpha, beta, gamma }
}

impl BayesRidgeModel {
    pub(crate) fn fit(params: &BayesRidgeParams, x: &Matrix, y: &[f64]) -> Result<Self> {
        let n = x.rows();
        let d = x.cols();
        let cols = x.columns();
        let x_mean: Vec<f64> = cols.iter().map(|c| stats::mean(c)).collect();
        let x_scale: Vec<f64> = cols
            .iter()
            .map(|c| match stats::pop_std(c) {
                s if s > 0.0 => s,
                _ => 1.0,
            })
            .collect();
        let y_mean = stats::mean(y);
        let y_scale = match stats::pop_std(y) {
            s if s > 0.0 => s,
            _ => 1.0,
        };

        if d == 0 {
            return Ok(Self {
                x_mean,
                x_scale,
                y_mean,
                y_scale,
                weights: Vec::new(),
                state: EvidenceState { alpha: 1.0, beta: 1.0, gamma: 0.0 },
                iterations: 0,
            });
        }

        let z = DMatrix::from_fn(n, d, |i, j| (x.at(i, j) - x_mean[j]) / x_scale[j]);
        let t = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_scale));
        let xtx = z.transpose() * &z;
        let xty = z.transpose() * &t;
        let eigenvalues: Vec<f64> =
            SymmetricEigen::new(xtx.clone()).eigenvalues.iter().map(|&l| l.max(0.0)).collect();

        let var_t = t.norm_squared() / n as f64;
        let mut st = EvidenceState { alpha: 1.0, beta: 1.0 / (var_t + f64::EPSILON), gamma: 0.0 };
        let mut w_old: Option<DVector<f64>> = None;
        let mut iterations = 0;
        for _ in 0..params.max_iter {
            iterations += 1;
            let w = posterior_mean(&xtx, &xty, &st)?;
            let rss = (&t - &z * &w).norm_squared();
            st = hyperupdate(params, &st, &w, rss, &eigenvalues, n);
            let done = w_old.as_ref().is_some_and(|old| (old - &w).amax() < params.tol);
            w_old = Some(w);
            if done {
                break;
            }
        }
        let w = posterior_mean(&xtx, &xty, &st)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("bayesian ridge produced non-finite weights".into()));
        }
        Ok(Self {
            x_mean,
            x_scale,
            y_mean,
            y_scale,
            weights: w.iter().copied().collect(),
            state: st,
            iterations,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = row
            .iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .zip(&self.weights)
            .map(|(((x, m), sc), w)| (x - m) / sc * w)
            .sum();
        self.y_mean + self.y_scale * s
    }

    /// Weights in the original feature and target units.
    pub fn coefficients(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.x_scale).map(|(w, sc)| w * self.y_scale / sc).collect()
    }

    pub fn intercept(&self) -> f64 {
        self.y_mean - self.coefficients().iter().zip(&self.x_mean).map(|(c, m)| c * m).sum::<f64>()
    }
}

//! Histogram estimate of the divergence between observed values and the
//! values imputed at missing cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Added to every normalized bin frequency before renormalizing.
pub const SMOOTHING: f64 = 1e-9;
pub const MIN_BINS: usize = 5;
pub const MAX_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "bins")]
pub enum BinningPolicy {
    /// Freedman-Diaconis width on the observed values, clamped to
    /// `MIN_BINS..=MAX_BINS`.
    #[default]
    Auto,
    Fixed(usize),
}

/// Shared equal-width bins over the union range of two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn new(observed: &[f64], imputed: &[f64], policy: BinningPolicy) -> Result<Self> {
        let (lo, hi) = observed
            .iter()
            .chain(imputed)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let count = match policy {
            BinningPolicy::Fixed(0) => return Err(Error::Config("bin count must be >= 1".into())),
            BinningPolicy::Fixed(b) => b,
            BinningPolicy::Auto => freedman_diaconis(observed, hi - lo),
        };
        Ok(Self { lo, hi, count })
    }

    pub fn index(&self, x: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let k = ((x - self.lo) / (self.hi - self.lo) * self.count as f64).floor();
        (k.max(0.0) as usize).min(self.count - 1)
    }

    /// Smoothed, normalized histogram of `xs`.
    pub fn histogram(&self, xs: &[f64]) -> Vec<f64> {
        let mut counts = vec![0usize; self.count];
        for &x in xs {
            counts[self.index(x)] += 1;
        }
        let total = xs.len() as f64;
        let norm = 1.0 + SMOOTHING * self.count as f64;
        counts.iter().map(|&c| (c as f64 / total + SMOOTHING) / norm).collect()
    }
}

fn freedman_diaconis(observed: &[f64], range: f64) -> usize {
    let mut sorted = observed.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let width = 2.0 * iqr * (sorted.len() as f64).powf(-1.0 / 3.0);
    if width.is_nan() || width <= 0.0 || range.is_nan() || range <= 0.0 {
        return MIN_BINS;
    }
    ((range / width).ceil() as usize).clamp(MIN_BINS, MAX_BINS)
}

/// `sum p log(p / q)` over smoothed histograms of two distributions.
pub fn divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p.iter().zip(q).map(|(&a, &b)| if a == b { 0.0 } else { a * (a / b).ln() }).sum();
    kl.max(0.0)
}

/// Divergence of the imputed-value histogram from the observed one. An empty
/// `imputed` sample gives 0.
pub fn kl_per_variable(observed: &[f64], imputed: &[f64], policy: BinningPolicy) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::InsufficientData("no observed values".into()));
    }
    if observed.iter().chain(imputed).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in divergence input".into()));
    }
    if imputed.is_empty() {
        return Ok(0.0);
    }
    let bins = Bins::new(observed, imputed, policy)?;
    Ok(divergence(&bins.histogram(observed), &bins.histogram(imputed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_zero() {
        let xs = [0.1, 0.5, 0.7, 2.0, 3.5, 3.6];
        assert_eq!(kl_per_variable(&xs, &xs, BinningPolicy::Auto).unwrap(), 0.0);
    }

    #[test]
    fn empty_imputation_is_zero() {
        assert_eq!(kl_per_variable(&[1.0, 2.0], &[], BinningPolicy::Auto).unwrap(), 0.0);
    }

    #[test]
    fn two_bin_hand_sum() {
        let kl = kl_per_variable(&[0.0, 1.0], &[0.0, 0.0], BinningPolicy::Fixed(2)).unwrap();
        let e = SMOOTHING;
        let z = 1.0 + 2.0 * e;
        let (p0, p1) = ((0.5 + e) / z, (0.5 + e) / z);
        let (q0, q1) = ((1.0 + e) / z, e / z);
        let hand = p0 * (p0 / q0).ln() + p1 * (p1 / q1).ln();
        assert!((kl - hand).abs() < 1e-12, "{kl} vs {hand}");
    }

    #[test]
    fn point_mass_diverges_more_than_matched_spread() {
        let observed: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let point = vec![stats::mean(&observed); 50];
        let spread: Vec<f64> = observed.iter().step_by(4).copied().collect();
        let kl_point = kl_per_variable(&observed, &point, BinningPolicy::Auto).unwrap();
        let kl_spread = kl_per_variable(&observed, &spread, BinningPolicy::Auto).unwrap();
        assert!(kl_point > kl_spread, "{kl_point} <= {kl_spread}");
        assert!(kl_point > 1.0);
    }

    #[test]
    fn constant_range_uses_one_effective_bin() {
        assert_eq!(kl_per_variable(&[2.0, 2.0], &[2.0], BinningPolicy::Auto).unwrap(), 0.0);
    }

    #[test]
    fn bin_count_is_clamped() {
        let narrow: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b = Bins::new(&narrow, &[1000.0], BinningPolicy::Auto).unwrap();
        assert_eq!(b.count, MAX_BINS);
        let b = Bins::new(&[1.0, 1.0, 1.0, 5.0], &[], BinningPolicy::Auto).unwrap();
        assert_eq!(b.count, MIN_BINS);
    }

    #[test]
    fn non_finite_rejected() {
        let err = kl_per_variable(&[1.0], &[f64::NAN], BinningPolicy::Auto).unwrap_err();
        assert_eq!(err.kind(), "numeric");
    }
}

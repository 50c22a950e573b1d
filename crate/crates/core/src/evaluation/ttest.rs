use serde::{Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    /// Infinite when every difference is the same nonzero value.
    #[serde(serialize_with = "finite_or_label")]
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
}

fn finite_or_label<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    match *v {
        x if x.is_finite() => s.serialize_f64(x),
        x if x > 0.0 => s.serialize_str("inf"),
        _ => s.serialize_str("-inf"),
    }
}

/// Paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("paired t-test needs at least 2 pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in paired samples".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = d.len() - 1;
    let mean = stats::mean(&d);
    let sd = stats::sample_std(&d);
    if d.iter().all(|&v| v == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df });
    }
    if sd == 0.0 {
        return Ok(TTest { t: f64::INFINITY.copysign(mean), p: 0.0, df });
    }
    let t = mean / (sd / (d.len() as f64).sqrt());
    let dist =
        StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numeric(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples() {
        let a = [0.3, 1.2, 0.8];
        assert_eq!(paired_t_test(&a, &a).unwrap(), TTest { t: 0.0, p: 1.0, df: 2 });
    }

    #[test]
    fn constant_difference_is_infinite() {
        let a = [2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert_eq!(r.t, f64::INFINITY);
        assert_eq!(r.p, 0.0);
        assert_eq!(serde_json::to_value(r).unwrap()["t"], "inf");
        assert_eq!(paired_t_test(&b, &a).unwrap().t, f64::NEG_INFINITY);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0]).unwrap_err().kind(), "alignment");
    }

    #[test]
    fn swap_negates_t() {
        let a = [1.0, 2.5, 0.3, 4.0];
        let b = [0.5, 2.0, 1.3, 3.0];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }
}

use serde::Serialize;

use super::Flag;
use crate::error::{Error, Result};
use crate::stats;

/// Per-variable error and divergence of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub model: String,
    pub variables: Vec<String>,
    pub mre: Vec<Option<f64>>,
    pub kl: Vec<f64>,
}

/// A variable's position relative to the baseline. Coordinates are absent
/// where the baseline metric is 0 or the model metric is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelPoint {
    pub rel_mre: Option<f64>,
    pub rel_kl: Option<f64>,
    pub combined_norm: Option<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPlane {
    pub model: String,
    pub points: Vec<RelPoint>,
    pub mean_rel_mre: Option<f64>,
    pub mean_rel_kl: Option<f64>,
    pub mean_combined_norm: Option<f64>,
}

/// Euclidean length of a relative point.
pub fn combined_norm(rel_mre: f64, rel_kl: f64) -> f64 {
    (rel_mre * rel_mre + rel_kl * rel_kl).sqrt()
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| stats::mean(&v))
}

/// Ratios of every model's metrics to the baseline's, per variable.
pub fn relative_plane(models: &[ModelMetrics], baseline: &ModelMetrics) -> Result<Vec<ModelPlane>> {
    for m in models {
        if m.variables != baseline.variables
            || m.mre.len() != m.variables.len()
            || m.kl.len() != m.variables.len()
        {
            return Err(Error::Alignment(format!(
                "model `{}` does not cover the baseline's variables",
                m.model
            )));
        }
    }
    if baseline.mre.len() != baseline.variables.len() || baseline.kl.len() != baseline.variables.len() {
        return Err(Error::Alignment("baseline metrics do not match its variables".into()));
    }
    if baseline.kl.iter().chain(baseline.mre.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("baseline metrics must be finite".into()));
    }

    let planes = models
        .iter()
        .map(|m| {
            let points: Vec<RelPoint> = (0..m.variables.len())
                .map(|j| {
                    let mut flags = Vec::new();
                    let rel_mre = match (m.mre[j], baseline.mre[j]) {
                        (Some(x), Some(b)) if b != 0.0 => Some(x / b),
                        (_, Some(_)) => {
                            flags.push(Flag::ZeroBaselineMre);
                            None
                        }
                        _ => None,
                    };
                    let rel_kl = if baseline.kl[j] != 0.0 {
                        Some(m.kl[j] / baseline.kl[j])
                    } else {
                        flags.push(Flag::ZeroBaselineKl);
                        None
                    };
                    let combined_norm = rel_mre.zip(rel_kl).map(|(a, b)| combined_norm(a, b));
                    RelPoint { rel_mre, rel_kl, combined_norm, flags }
                })
                .collect();
            ModelPlane {
                model: m.model.clone(),
                mean_rel_mre: mean_of(points.iter().map(|p| p.rel_mre)),
                mean_rel_kl: mean_of(points.iter().map(|p| p.rel_kl)),
                mean_combined_norm: mean_of(points.iter().map(|p| p.combined_norm)),
                points,
            }
        })
        .collect();
    Ok(planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(model: &str, mre: &[f64], kl: &[f64]) -> ModelMetrics {
        ModelMetrics {
            model: model.into(),
            variables: (0..mre.len()).map(|j| format!("v{j}")).collect(),
            mre: mre.iter().map(|&v| Some(v)).collect(),
            kl: kl.to_vec(),
        }
    }

    #[test]
    fn baseline_maps_to_unit_point() {
        let base = metrics("mean", &[0.3, 0.7], &[2.0, 5.0]);
        let plane = relative_plane(std::slice::from_ref(&base), &base).unwrap();
        for p in &plane[0].points {
            assert_eq!((p.rel_mre, p.rel_kl), (Some(1.0), Some(1.0)));
            assert_eq!(p.combined_norm, Some(std::f64::consts::SQRT_2));
        }
    }

    #[test]
    fn ratio_definition() {
        let base = metrics("mean", &[0.4], &[4.0]);
        let m = metrics("et", &[0.2], &[1.0]);
        let plane = relative_plane(&[m], &base).unwrap();
        assert_eq!(plane[0].points[0].rel_mre, Some(0.5));
        assert_eq!(plane[0].points[0].rel_kl, Some(0.25));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(combined_norm(1.0, 1.0), 2f64.sqrt());
        assert_eq!(combined_norm(0.0, 0.0), 0.0);
        assert!((combined_norm(0.6, 0.25) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn zero_baseline_is_excluded_and_flagged() {
        let base = metrics("mean", &[0.0, 0.5], &[1.0, 0.0]);
        let m = metrics("et", &[0.1, 0.25], &[0.5, 0.3]);
        let plane = relative_plane(&[m], &base).unwrap();
        let pts = &plane[0].points;
        assert_eq!(pts[0].rel_mre, None);
        assert_eq!(pts[0].flags, vec![Flag::ZeroBaselineMre]);
        assert_eq!(pts[1].rel_kl, None);
        assert_eq!(plane[0].mean_rel_mre, Some(0.5));
        assert_eq!(plane[0].mean_rel_kl, Some(0.5));
        assert_eq!(plane[0].mean_combined_norm, None);
    }

    #[test]
    fn variable_mismatch_is_alignment_error() {
        let base = metrics("mean", &[0.1, 0.2], &[1.0, 1.0]);
        let m = metrics("et", &[0.1], &[1.0]);
        assert_eq!(relative_plane(&[m], &base).unwrap_err().kind(), "alignment");
    }
}

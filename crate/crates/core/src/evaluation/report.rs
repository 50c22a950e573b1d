use serde::{Deserialize, Serialize};

use super::{
    kl_per_variable, loo_mre, paired_t_test, relative_plane, seed_stability, BinningPolicy, Flag, LooConfig,
    ModelMetrics, TTest,
};
use crate::data::Table;
use crate::error::{Error, Result};
use crate::regressors::{RegressorSpec, Strategy};
use crate::roundrobin::{self, RoundRobinConfig};
use crate::stats;

/// Name of the reference model every other model is divided by.
pub const BASELINE: &str = "mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub roundrobin: RoundRobinConfig,
    pub loo: LooConfig,
    pub bins: BinningPolicy,
    /// Seed count for the stability analysis of seed-dependent models.
    pub stability_seeds: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            roundrobin: RoundRobinConfig::default(),
            loo: LooConfig::default(),
            bins: BinningPolicy::Auto,
            stability_seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableReport {
    pub variable: String,
    pub mre: Option<f64>,
    pub kl: f64,
    pub rel_mre: Option<f64>,
    pub rel_kl: Option<f64>,
    pub combined_norm: Option<f64>,
    pub cells_evaluated: usize,
    pub flags: Vec<Flag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_std_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean_mre: Option<f64>,
    pub mean_kl: f64,
    pub mean_rel_mre: Option<f64>,
    pub mean_rel_kl: Option<f64>,
    pub mean_combined_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub spec: RegressorSpec,
    pub rounds_used: usize,
    pub per_variable: Vec<VariableReport>,
    pub summary: Summary,
}

/// Paired test on combined norms over variables defined for both models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedTest {
    pub a: String,
    pub b: String,
    pub variables: usize,
    #[serde(flatten)]
    pub result: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub baseline: String,
    pub variables: Vec<String>,
    pub models: Vec<ModelReport>,
    pub tests: Vec<PairedTest>,
}

impl EvaluationReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }
}

/// Evaluates every spec on `table`. The mean baseline is added when absent.
/// Models are labelled by their short strategy names, which must be unique.
pub fn evaluate(table: &Table, specs: &[RegressorSpec], settings: &EvalSettings) -> Result<EvaluationReport> {
    let mut specs = specs.to_vec();
    if !specs.iter().any(|s| s.strategy == Strategy::Mean) {
        let seed = specs.first().map_or(0, |s| s.seed);
        specs.insert(0, RegressorSpec::new(Strategy::Mean, seed));
    }
    let mut names: Vec<String> = specs.iter().map(RegressorSpec::label).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("model `{}` listed more than once", w[0])));
    }

    let data = &table.data;
    let vars = &table.vars;
    let variables: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();

    struct Raw {
        metrics: ModelMetrics,
        loo_flags: Vec<Vec<Flag>>,
        cells: Vec<usize>,
        rounds: usize,
        stability: Option<Vec<f64>>,
    }

    let mut raws = Vec::with_capacity(specs.len());
    for spec in &specs {
        let full = roundrobin::run(data, spec, vars, &settings.roundrobin)?;
        let mut kl = Vec::with_capacity(data.p());
        let mut loo_flags = Vec::with_capacity(data.p());
        let loo = loo_mre(data, spec, vars, &settings.roundrobin, &settings.loo)?;
        for (j, v) in loo.variables.iter().enumerate() {
            let observed = data.observed_values(j);
            let imputed: Vec<f64> =
                data.missing_rows(j).into_iter().map(|i| full.imputed.get(i, j).expect("complete")).collect();
            let mut flags = v.flags.clone();
            if imputed.is_empty() {
                flags.push(Flag::NoImputedValues);
            }
            kl.push(kl_per_variable(&observed, &imputed, settings.bins)?);
            loo_flags.push(flags);
        }
        let stability = match settings.stability_seeds {
            Some(n) if spec.strategy.seed_sensitive() => {
                Some(seed_stability(data, spec, vars, &settings.roundrobin, n)?.per_variable_max)
            }
            _ => None,
        };
        raws.push(Raw {
            metrics: ModelMetrics { model: spec.label(), variables: variables.clone(), mre: loo.mre(), kl },
            cells: loo.variables.iter().map(|v| v.cells.len()).collect(),
            loo_flags,
            rounds: full.rounds_used,
            stability,
        });
    }

    let baseline = raws
        .iter()
        .find(|r| r.metrics.model == BASELINE)
        .map(|r| r.metrics.clone())
        .expect("baseline inserted above");
    let all: Vec<ModelMetrics> = raws.iter().map(|r| r.metrics.clone()).collect();
    let planes = relative_plane(&all, &baseline)?;

    let models: Vec<ModelReport> = raws
        .into_iter()
        .zip(planes)
        .zip(&specs)
        .map(|((raw, plane), spec)| {
            let per_variable = (0..variables.len())
                .map(|j| {
                    let pt = &plane.points[j];
                    let mut flags = raw.loo_flags[j].clone();
                    flags.extend(pt.flags.iter().copied());
                    flags.sort_unstable();
                    flags.dedup();
                    VariableReport {
                        variable: variables[j].clone(),
                        mre: raw.metrics.mre[j],
                        kl: raw.metrics.kl[j],
                        rel_mre: pt.rel_mre,
                        rel_kl: pt.rel_kl,
                        combined_norm: pt.combined_norm,
                        cells_evaluated: raw.cells[j],
                        flags,
                        seed_std_max: raw.stability.as_ref().map(|s| s[j]),
                    }
                })
                .collect();
            let mres: Vec<f64> = raw.metrics.mre.iter().flatten().copied().collect();
            ModelReport {
                model: raw.metrics.model.clone(),
                spec: spec.clone(),
                rounds_used: raw.rounds,
                per_variable,
                summary: Summary {
                    mean_mre: (!mres.is_empty()).then(|| stats::mean(&mres)),
                    mean_kl: stats::mean(&raw.metrics.kl),
                    mean_rel_mre: plane.mean_rel_mre,
                    mean_rel_kl: plane.mean_rel_kl,
                    mean_combined_norm: plane.mean_combined_norm,
                },
            }
        })
        .collect();

    let mut tests = Vec::new();
    for (x, a) in models.iter().enumerate() {
        for b in &models[x + 1..] {
            let (na, nb): (Vec<f64>, Vec<f64>) = a
                .per_variable
                .iter()
                .zip(&b.per_variable)
                .filter_map(|(va, vb)| va.combined_norm.zip(vb.combined_norm))
                .unzip();
            if na.len() < 2 {
                continue;
            }
            tests.push(PairedTest {
                a: a.model.clone(),
                b: b.model.clone(),
                variables: na.len(),
                result: paired_t_test(&na, &nb)?,
            });
        }
    }

    Ok(EvaluationReport { baseline: BASELINE.to_string(), variables, models, tests })
}

/// One row per (variable, model): the relative point and its norm. Undefined
/// coordinates are left empty.
pub fn long_table(report: &EvaluationReport, delimiter: u8) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Schema(format!("cannot render plane table: {e}"));
    w.write_record(["variable", "model", "rel_mre", "rel_kl", "combined_norm"]).map_err(err)?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (j, name) in report.variables.iter().enumerate() {
        for m in &report.models {
            let v = &m.per_variable[j];
            w.write_record([
                name.clone(),
                m.model.clone(),
                cell(v.rel_mre),
                cell(v.rel_kl),
                cell(v.combined_norm),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Schema(format!("cannot render plane table: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataMatrix, Table};

    fn small_table() -> Table {
        let rows: Vec<Vec<Option<f64>>> = (0..16)
            .map(|i| {
                let x = i as f64;
                vec![
                    Some(x + 1.0),
                    if i % 5 == 1 { None } else { Some(2.0 * x + 3.0) },
                    if i % 4 == 2 { None } else { Some(10.0 - 0.5 * x) },
                ]
            })
            .collect();
        Table::from_matrix(DataMatrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn baseline_is_added_and_sits_at_unit_point() {
        let specs = [RegressorSpec::named("br").unwrap()];
        let r = evaluate(&small_table(), &specs, &EvalSettings::default()).unwrap();
        assert_eq!(r.models[0].model, "mean");
        let base = r.model("mean").unwrap();
        for v in &base.per_variable {
            if v.mre.is_some_and(|m| m > 0.0) {
                assert_eq!(v.rel_mre, Some(1.0));
            }
            if v.kl > 0.0 {
                assert_eq!(v.rel_kl, Some(1.0));
            }
        }
        // Column 0 has nothing to impute.
        assert!(base.per_variable[0].flags.contains(&Flag::NoImputedValues));
        assert_eq!(base.per_variable[0].rel_kl, None);
    }

    #[test]
    fn duplicate_models_rejected() {
        let specs = [RegressorSpec::named("et").unwrap(), RegressorSpec::named("et").unwrap()];
        let err = evaluate(&small_table(), &specs, &EvalSettings::default()).unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    #[test]
    fn long_table_has_a_row_per_variable_and_model() {
        let specs = [RegressorSpec::named("mean").unwrap(), RegressorSpec::named("knn").unwrap()];
        let r = evaluate(&small_table(), &specs, &EvalSettings::default()).unwrap();
        let text = String::from_utf8(long_table(&r, b',').unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(text.starts_with("variable,model,rel_mre,rel_kl,combined_norm\n"));
    }
}

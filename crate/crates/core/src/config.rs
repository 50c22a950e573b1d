//! Resolved run configuration shared by every subcommand.
//!
//! Values come from command-line flags, then a config file (TOML, or JSON,
//! which also accepts a previous run manifest), then defaults. The resolved
//! [`RunConfig`] is written into each run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Table, TableFormat, VariableKind};
use crate::error::{Error, Result};
use crate::evaluation::{BinningPolicy, EvalSettings, LooConfig, Sampling};
use crate::orderer::PlanMode;
use crate::regressors::{RegressorSpec, Strategy};
use crate::roundrobin::RoundRobinConfig;
use crate::synth::{MissingnessConfig, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    Impute,
    ImputePlan,
    Order,
    Evaluate,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Impute => "impute",
            Command::ImputePlan => "impute-plan",
            Command::Order => "order",
            Command::Evaluate => "evaluate",
            Command::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Models to compare; the mean baseline is added when absent.
    pub regressors: Vec<RegressorSpec>,
    /// Held-out cells per variable; `None` evaluates every observed cell.
    pub sample_per_variable: Option<usize>,
    pub bins: BinningPolicy,
    /// Seed count for the stability analysis of seed-dependent models.
    pub seeds: Option<usize>,
    /// Plot-ready long table; defaults next to the report.
    pub long_table: Option<PathBuf>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            regressors: ["mean", "median", "br", "dt", "et", "knn"]
                .iter()
                .map(|n| RegressorSpec::named(n).expect("built-in name"))
                .collect(),
            sample_per_variable: Some(30),
            bins: BinningPolicy::Auto,
            seeds: None,
            long_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub subsets: Option<PathBuf>,
    /// A precomputed plan; when absent one is derived with `mode`.
    pub plan: Option<PathBuf>,
    pub mode: PlanMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub synth: SynthConfig,
    /// No missingness is applied when absent.
    pub missingness: Option<MissingnessConfig>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                n: 400,
                p: 20,
                latent_rank: 4,
                noise_sd: 0.5,
                offset: 10.0,
                kinds: Vec::new(),
                seed: 0,
            },
            missingness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    /// Primary artifact: imputed table, plan, report, or output directory.
    pub output: Option<PathBuf>,
    /// Run manifest; defaults to `<output>.manifest.json`.
    pub manifest: Option<PathBuf>,
    /// Global seed, copied into every regressor and sampler.
    pub seed: u64,
    /// Worker threads; all cores when absent. Never affects results.
    pub jobs: Option<usize>,
    pub table: TableFormat,
    /// Variable kinds by name; unlisted variables are continuous.
    pub kinds: BTreeMap<String, VariableKind>,
    /// Variables never used as regression inputs.
    pub exclude_predictors: Vec<String>,
    pub regressor: RegressorSpec,
    pub roundrobin: RoundRobinConfig,
    pub evaluation: EvaluationSection,
    pub plan: PlanSection,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            input: None,
            output: None,
            manifest: None,
            seed: 0,
            jobs: None,
            table: TableFormat::default(),
            kinds: BTreeMap::new(),
            exclude_predictors: Vec::new(),
            regressor: RegressorSpec::new(Strategy::Mean, 0),
            roundrobin: RoundRobinConfig::default(),
            evaluation: EvaluationSection::default(),
            plan: PlanSection::default(),
            simulate: SimulateSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. JSON files holding a run manifest contribute
    /// their `config` member.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }

    /// Propagates the global seed and checks cross-field consistency.
    pub fn finish(mut self) -> Result<Self> {
        self.regressor.seed = self.seed;
        self.regressor.validate()?;
        for spec in &mut self.evaluation.regressors {
            spec.seed = self.seed;
            spec.validate()?;
        }
        self.simulate.synth.seed = self.seed;
        if let Some(m) = &mut self.simulate.missingness {
            m.seed = self.seed;
        }
        if self.roundrobin.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be >= 1".into()));
        }
        if self.roundrobin.tol.is_nan() || self.roundrobin.tol < 0.0 {
            return Err(Error::Config("tol must be >= 0".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if self.evaluation.sample_per_variable == Some(0) {
            return Err(Error::Config("sample_per_variable must be >= 1".into()));
        }
        Ok(self)
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            roundrobin: self.roundrobin.clone(),
            loo: LooConfig {
                sample: match self.evaluation.sample_per_variable {
                    Some(k) => Sampling::PerVariable(k),
                    None => Sampling::All,
                },
                seed: self.seed,
            },
            bins: self.evaluation.bins,
            stability_seeds: self.evaluation.seeds,
        }
    }

    /// Applies configured kinds and predictor exclusions to a loaded table.
    pub fn annotate(&self, table: &mut Table) -> Result<()> {
        for (name, kind) in &self.kinds {
            let j = table
                .column_index(name)
                .ok_or_else(|| Error::Config(format!("kind given for unknown variable `{name}`")))?;
            table.vars[j].kind = *kind;
        }
        for name in &self.exclude_predictors {
            let j = table
                .column_index(name)
                .ok_or_else(|| Error::Config(format!("cannot exclude unknown variable `{name}`")))?;
            table.vars[j].predictor_allowed = false;
        }
        Ok(())
    }

    /// Appends the models of a hyperparameter sweep to the evaluation list,
    /// skipping any already present. Each axis reads `strategy:key=v1,v2`;
    /// axes naming the same strategy combine as a cartesian product.
    pub fn add_grid(&mut self, axes: &[String]) -> Result<()> {
        let mut sweeps: BTreeMap<String, Vec<(String, Vec<String>)>> = BTreeMap::new();
        for axis in axes {
            let parsed = axis.split_once(':').and_then(|(name, rest)| {
                let (key, values) = rest.split_once('=')?;
                let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
                (!values.iter().any(String::is_empty)).then(|| (name.trim(), key.trim(), values))
            });
            let (name, key, values) = parsed.ok_or_else(|| {
                Error::Config(format!("grid axis must read `strategy:key=v1,v2`, got `{axis}`"))
            })?;
            let name = Strategy::from_name(name)?.short_name().to_string();
            sweeps.entry(name).or_default().push((key.to_string(), values));
        }
        for (name, sweep) in sweeps {
            let mut points = vec![BTreeMap::new()];
            for (key, values) in &sweep {
                points = points
                    .into_iter()
                    .flat_map(|point| {
                        values.iter().map(move |v| {
                            let mut next = point.clone();
                            next.insert(key.clone(), v.clone());
                            next
                        })
                    })
                    .collect();
            }
            for point in points {
                let spec = RegressorSpec::from_pairs(&name, &point, self.seed)?;
                if !self.evaluation.regressors.iter().any(|r| r.label() == spec.label()) {
                    self.evaluation.regressors.push(spec);
                }
            }
        }
        Ok(())
    }

    /// Explicit manifest path, else `manifest.json` inside a simulation
    /// directory, else next to the primary artifact.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        self.manifest.clone().or_else(|| {
            self.output.as_ref().map(|o| {
                if self.command == Command::Simulate {
                    return o.join("manifest.json");
                }
                let mut s = o.as_os_str().to_owned();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_override_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 9
            exclude_predictors = ["diagnosis"]
            [regressor]
            strategy = "extra_trees"
            params = { n_trees = 4 }
            [roundrobin]
            max_rounds = 12
            "#,
        )
        .unwrap();
        let cfg = cfg.finish().unwrap();
        assert_eq!(cfg.roundrobin.max_rounds, 12);
        assert_eq!(cfg.roundrobin.tol, 1e-3);
        assert_eq!(cfg.regressor.seed, 9);
        match &cfg.regressor.strategy {
            Strategy::ExtraTrees(p) => assert_eq!(p.n_trees, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[regressor]\nstrategy = \"knn\"\nparams = { kk = 3 }").is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::default().finish().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn grid_axes_expand_to_a_product() {
        let mut cfg = RunConfig::default();
        cfg.evaluation.regressors = vec![RegressorSpec::named("et").unwrap()];
        cfg.add_grid(&["et:n_trees=5,10".into(), "extra_trees:min_samples_leaf=1,3".into()]).unwrap();
        let labels: Vec<String> = cfg.evaluation.regressors.iter().map(RegressorSpec::label).collect();
        assert_eq!(
            labels,
            ["et", "et[n_trees=5]", "et[min_samples_leaf=3,n_trees=5]", "et[min_samples_leaf=3]"]
        );
        assert!(cfg.add_grid(&["et:n_trees".into()]).is_err());
        assert!(cfg.add_grid(&["et:depth=1".into()]).is_err());
    }

    #[test]
    fn manifest_defaults_next_to_output() {
        let cfg = RunConfig { output: Some("out/imputed.csv".into()), ..RunConfig::default() };
        assert_eq!(cfg.manifest_path().unwrap(), PathBuf::from("out/imputed.csv.manifest.json"));
    }
}

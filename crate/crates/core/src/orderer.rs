//! Ordering and execution of overlapping subsets.
//!
//! A subset may borrow the already-imputed variables of an earlier subset as
//! extra predictors only when that subset's population contains its own.
//! Plans are scored by a [`PlanScorer`]; the default counts usable
//! conditioning observations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{validate_subsets, DataMatrix, SubsetSpec, Table, VariableMeta};
use crate::error::{Error, Result};
use crate::regressors::RegressorSpec;
use crate::roundrobin::{self, RoundRobinConfig};

/// Most subsets the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// True when every participant of `target` is also in `cond`.
pub fn containment_ok(target: &SubsetSpec, cond: &SubsetSpec) -> bool {
    target.participant_ids.is_subset(&cond.participant_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Exhaustive,
    #[default]
    Greedy,
}

impl std::str::FromStr for PlanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "greedy" => Ok(Self::Greedy),
            _ => Err(Error::Config(format!("unknown plan mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub target: u32,
    /// Earlier subsets whose variables serve as extra predictors, in plan order.
    pub conditioning: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationPlan {
    pub steps: Vec<PlanStep>,
    pub score: f64,
}

/// Value of imputing `target` with the given conditioning subsets.
pub trait PlanScorer {
    fn step_score(&self, target: &SubsetSpec, conditioning: &[&SubsetSpec]) -> f64;
}

/// Target participants times conditioning variables.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConditioningObservations;

impl PlanScorer for ConditioningObservations {
    fn step_score(&self, target: &SubsetSpec, conditioning: &[&SubsetSpec]) -> f64 {
        let vars: usize = conditioning.iter().map(|s| s.p()).sum();
        (target.n() * vars) as f64
    }
}

/// Subsets sorted by id with a precomputed containment table.
struct Family<'a> {
    subsets: Vec<&'a SubsetSpec>,
    /// `contains[c][t]`: subset `c` may condition subset `t`.
    contains: Vec<Vec<bool>>,
}

impl<'a> Family<'a> {
    fn new(subsets: &'a [SubsetSpec]) -> Self {
        let mut sorted: Vec<&SubsetSpec> = subsets.iter().collect();
        sorted.sort_by_key(|s| s.id);
        let contains = sorted
            .iter()
            .map(|c| sorted.iter().map(|t| c.id != t.id && containment_ok(t, c)).collect())
            .collect();
        Self { subsets: sorted, contains }
    }

    fn len(&self) -> usize {
        self.subsets.len()
    }

    /// Placed subsets (by index, in placement order) that may condition `t`.
    fn conditioners(&self, t: usize, placed: impl Iterator<Item = usize>) -> Vec<usize> {
        placed.filter(|&c| self.contains[c][t]).collect()
    }

    fn gain(&self, scorer: &dyn PlanScorer, t: usize, conds: &[usize]) -> f64 {
        let refs: Vec<&SubsetSpec> = conds.iter().map(|&c| self.subsets[c]).collect();
        scorer.step_score(self.subsets[t], &refs)
    }

    fn plan_from(&self, scorer: &dyn PlanScorer, order: &[usize]) -> ImputationPlan {
        let mut steps = Vec::with_capacity(order.len());
        let mut score = 0.0;
        for (k, &t) in order.iter().enumerate() {
            let conds = self.conditioners(t, order[..k].iter().copied());
            score += self.gain(scorer, t, &conds);
            steps.push(PlanStep {
                target: self.subsets[t].id,
                conditioning: conds.iter().map(|&c| self.subsets[c].id).collect(),
            });
        }
        ImputationPlan { steps, score }
    }
}

/// Orders `subsets` with the default scorer.
pub fn plan_order(subsets: &[SubsetSpec], mode: PlanMode) -> Result<ImputationPlan> {
    plan_order_with(subsets, mode, &ConditioningObservations)
}

pub fn plan_order_with(
    subsets: &[SubsetSpec],
    mode: PlanMode,
    scorer: &dyn PlanScorer,
) -> Result<ImputationPlan> {
    if subsets.is_empty() {
        return Err(Error::EmptyInput);
    }
    validate_subsets(subsets)?;
    let family = Family::new(subsets);
    let order = match mode {
        PlanMode::Exhaustive => exhaustive(&family, scorer)?,
        PlanMode::Greedy => greedy(&family, scorer),
    };
    Ok(family.plan_from(scorer, &order))
}

/// Best score from each placed-set bitmask to completion, then the
/// lexicographically smallest id sequence reaching it.
fn exhaustive(family: &Family, scorer: &dyn PlanScorer) -> Result<Vec<usize>> {
    let k = family.len();
    if k > EXHAUSTIVE_LIMIT {
        return Err(Error::Capacity(format!(
            "exhaustive ordering accepts at most {EXHAUSTIVE_LIMIT} subsets, got {k}; use greedy mode"
        )));
    }
    let full = (1usize << k) - 1;
    let members = |mask: usize| (0..k).filter(move |&c| mask >> c & 1 == 1);
    let step_gain = |mask: usize, t: usize| {
        let conds = family.conditioners(t, members(mask));
        family.gain(scorer, t, &conds)
    };

    let mut best = vec![0.0f64; full + 1];
    for mask in (0..full).rev() {
        best[mask] = (0..k)
            .filter(|&t| mask >> t & 1 == 0)
            .map(|t| step_gain(mask, t) + best[mask | 1 << t])
            .fold(f64::NEG_INFINITY, f64::max);
    }

    let mut order = Vec::with_capacity(k);
    let mut mask = 0usize;
    while mask != full {
        let t = (0..k)
            .filter(|&t| mask >> t & 1 == 0)
            .find(|&t| step_gain(mask, t) + best[mask | 1 << t] == best[mask])
            .expect("some step attains the optimum");
        order.push(t);
        mask |= 1 << t;
    }
    Ok(order)
}

/// Repeatedly places the ready subset with the largest marginal score.
///
/// A subset is ready once every subset that could condition it and should
/// precede it has been placed: all strict supersets, and any subset with the
/// same population and more variables. Among ready subsets ties go to more
/// variables, then to the lower id.
fn greedy(family: &Family, scorer: &dyn PlanScorer) -> Vec<usize> {
    let k = family.len();
    let subsets = &family.subsets;
    let precedes = |c: usize, t: usize| {
        if !family.contains[c][t] {
            return false;
        }
        if !family.contains[t][c] {
            return true;
        }
        let (pc, pt) = (subsets[c].p(), subsets[t].p());
        pc > pt || (pc == pt && subsets[c].id < subsets[t].id)
    };

    let mut placed = vec![false; k];
    let mut order: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut pick: Option<(usize, f64)> = None;
        for t in (0..k).filter(|&t| !placed[t]) {
            if (0..k).any(|c| !placed[c] && c != t && precedes(c, t)) {
                continue;
            }
            let conds = family.conditioners(t, order.iter().copied());
            let g = family.gain(scorer, t, &conds);
            let better = match pick {
                None => true,
                Some((b, bg)) => g > bg || (g == bg && subsets[t].p() > subsets[b].p()),
            };
            if better {
                pick = Some((t, g));
            }
        }
        let (t, _) = pick.expect("strict precedence is acyclic");
        placed[t] = true;
        order.push(t);
    }
    order
}

/// Checks the structural invariants of `plan` against `subsets`.
pub fn validate_plan(plan: &ImputationPlan, subsets: &[SubsetSpec]) -> Result<()> {
    let by_id: HashMap<u32, &SubsetSpec> = subsets.iter().map(|s| (s.id, s)).collect();
    if plan.steps.len() != subsets.len() {
        return Err(Error::Contract(format!(
            "plan has {} steps for {} subsets",
            plan.steps.len(),
            subsets.len()
        )));
    }
    let mut position = HashMap::new();
    for (k, step) in plan.steps.iter().enumerate() {
        if !by_id.contains_key(&step.target) {
            return Err(Error::Contract(format!("unknown subset {}", step.target)));
        }
        if position.insert(step.target, k).is_some() {
            return Err(Error::Contract(format!("subset {} is targeted more than once", step.target)));
        }
    }
    for (k, step) in plan.steps.iter().enumerate() {
        let target = by_id[&step.target];
        for c in &step.conditioning {
            match position.get(c) {
                Some(&pos) if pos < k => {}
                _ => {
                    return Err(Error::Contract(format!(
                        "subset {} conditions on {c}, which is not imputed earlier",
                        step.target
                    )))
                }
            }
            if !containment_ok(target, by_id[c]) {
                return Err(Error::Contract(format!(
                    "subset {c} does not contain the participants of subset {}",
                    step.target
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub target: u32,
    pub rounds_used: usize,
    pub per_round_delta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// The input table with every subset block imputed.
    pub table: Table,
    pub steps: Vec<StepReport>,
}

/// Runs the plan over a wide table holding every subset's variables.
///
/// Each step imputes the target block from its own variables plus the
/// conditioning subsets' imputed variables, restricted to the target's
/// participants. Conditioning values are read, never written.
pub fn execute_plan(
    plan: &ImputationPlan,
    table: &Table,
    subsets: &[SubsetSpec],
    spec: &RegressorSpec,
    cfg: &RoundRobinConfig,
) -> Result<PlanOutcome> {
    validate_subsets(subsets)?;
    validate_plan(plan, subsets)?;
    let by_id: HashMap<u32, &SubsetSpec> = subsets.iter().map(|s| (s.id, s)).collect();
    let row_of: HashMap<&str, usize> = table.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let resolve_rows = |s: &SubsetSpec| -> Result<Vec<usize>> {
        let mut rows = s
            .participant_ids
            .iter()
            .map(|id| {
                row_of.get(id.as_str()).copied().ok_or_else(|| {
                    Error::Alignment(format!("subset {}: participant `{id}` not in table", s.id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.sort_unstable();
        Ok(rows)
    };
    let resolve_cols = |s: &SubsetSpec| -> Result<Vec<usize>> {
        s.variable_ids
            .iter()
            .map(|v| {
                table
                    .column_index(v)
                    .ok_or_else(|| Error::Alignment(format!("subset {}: variable `{v}` not in table", s.id)))
            })
            .collect()
    };

    let p = table.data.p();
    let mut values = table.data.raw_values().to_vec();
    let mut mask = table.data.mask().to_vec();
    let mut reports = Vec::with_capacity(plan.steps.len());

    for (k, step) in plan.steps.iter().enumerate() {
        let tag = |e: Error| Error::Step { step: k + 1, subset: step.target, source: Box::new(e) };
        let target = by_id[&step.target];
        let rows = resolve_rows(target).map_err(tag)?;
        let own = resolve_cols(target).map_err(tag)?;
        let mut cols = own.clone();
        for c in &step.conditioning {
            cols.extend(resolve_cols(by_id[c]).map_err(tag)?);
        }

        let mut block_values = Vec::with_capacity(rows.len() * cols.len());
        let mut block_mask = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            for (pos, &j) in cols.iter().enumerate() {
                let missing = mask[i * p + j];
                if missing && pos >= own.len() {
                    return Err(tag(Error::Contract(format!(
                        "conditioning variable `{}` is missing for participant `{}`",
                        table.vars[j].name, table.ids[i]
                    ))));
                }
                block_values.push(values[i * p + j]);
                block_mask.push(missing);
            }
        }
        let block = DataMatrix::new(rows.len(), cols.len(), block_values, block_mask).map_err(tag)?;
        let vars: Vec<VariableMeta> = cols.iter().map(|&j| table.vars[j].clone()).collect();
        let result = roundrobin::run(&block, spec, &vars, cfg).map_err(tag)?;

        for (r, &i) in rows.iter().enumerate() {
            for (pos, &j) in own.iter().enumerate() {
                values[i * p + j] = result.imputed.get(r, pos).expect("imputed block is complete");
                mask[i * p + j] = false;
            }
        }
        reports.push(StepReport {
            target: step.target,
            rounds_used: result.rounds_used,
            per_round_delta: result.per_round_delta,
        });
    }

    let data = DataMatrix::new(table.data.n(), p, values, mask)?;
    Ok(PlanOutcome { table: Table::new(table.ids.clone(), table.vars.clone(), data)?, steps: reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subset(id: u32, people: &[u32], p: usize) -> SubsetSpec {
        SubsetSpec::new(id, people.iter().map(|i| format!("r{i}")), (0..p).map(|k| format!("s{id}_{k}")))
    }

    #[test]
    fn containment_examples() {
        let cond = subset(1, &[1, 2, 3], 1);
        assert!(containment_ok(&subset(2, &[1, 2], 1), &cond));
        assert!(!containment_ok(&subset(3, &[1, 4], 1), &cond));
    }

    #[test]
    fn single_subset_plan() {
        for mode in [PlanMode::Exhaustive, PlanMode::Greedy] {
            let plan = plan_order(&[subset(7, &[1, 2], 3)], mode).unwrap();
            assert_eq!(plan.steps, vec![PlanStep { target: 7, conditioning: vec![] }]);
            assert_eq!(plan.score, 0.0);
        }
    }

    #[test]
    fn disjoint_subsets_go_by_id() {
        let subsets = [subset(5, &[3, 4], 2), subset(2, &[1, 2], 2)];
        for mode in [PlanMode::Exhaustive, PlanMode::Greedy] {
            let plan = plan_order(&subsets, mode).unwrap();
            let ids: Vec<u32> = plan.steps.iter().map(|s| s.target).collect();
            assert_eq!(ids, vec![2, 5]);
            assert!(plan.steps.iter().all(|s| s.conditioning.is_empty()));
        }
    }

    #[test]
    fn container_precedes_contained() {
        let subsets = [subset(1, &[1, 2], 2), subset(2, &[1, 2, 3], 4)];
        for mode in [PlanMode::Exhaustive, PlanMode::Greedy] {
            let plan = plan_order(&subsets, mode).unwrap();
            assert_eq!(plan.steps[0].target, 2);
            assert_eq!(plan.steps[1].conditioning, vec![2]);
            assert_eq!(plan.score, 8.0);
            validate_plan(&plan, &subsets).unwrap();
        }
    }

    #[test]
    fn equal_populations_put_wider_block_first() {
        let subsets = [subset(1, &[1, 2], 1), subset(2, &[1, 2], 3)];
        let plan = plan_order(&subsets, PlanMode::Greedy).unwrap();
        assert_eq!(plan.steps[0].target, 2);
        assert_eq!(plan.score, 6.0);
    }

    #[test]
    fn exhaustive_capacity() {
        let subsets: Vec<SubsetSpec> = (0..11).map(|k| subset(k, &[k], 1)).collect();
        let err = plan_order(&subsets, PlanMode::Exhaustive).unwrap_err();
        assert_eq!(err.kind(), "capacity");
        assert!(err.to_string().contains("greedy"));
        assert!(plan_order(&subsets, PlanMode::Greedy).is_ok());
    }

    #[test]
    fn validator_rejects_broken_plans() {
        let subsets = [subset(1, &[1, 2], 1), subset(2, &[1], 1)];
        let late = ImputationPlan {
            steps: vec![
                PlanStep { target: 2, conditioning: vec![1] },
                PlanStep { target: 1, conditioning: vec![] },
            ],
            score: 0.0,
        };
        assert_eq!(validate_plan(&late, &subsets).unwrap_err().kind(), "contract");
        let uncontained = ImputationPlan {
            steps: vec![
                PlanStep { target: 2, conditioning: vec![] },
                PlanStep { target: 1, conditioning: vec![2] },
            ],
            score: 0.0,
        };
        assert!(validate_plan(&uncontained, &subsets).is_err());
        let dup = ImputationPlan {
            steps: vec![
                PlanStep { target: 1, conditioning: vec![] },
                PlanStep { target: 1, conditioning: vec![] },
            ],
            score: 0.0,
        };
        assert!(validate_plan(&dup, &subsets).is_err());
    }

    #[test]
    fn plan_json_shape() {
        let plan = plan_order(&[subset(1, &[1], 1)], PlanMode::Greedy).unwrap();
        let v = serde_json::to_value(&plan).unwrap();
        assert_eq!(v["steps"][0]["target"], 1);
        assert!(v["steps"][0]["conditioning"].as_array().unwrap().is_empty());
    }
}

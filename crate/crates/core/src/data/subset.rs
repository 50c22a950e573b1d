use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block of variables acquired for one participant population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub id: u32,
    #[serde(rename = "participants")]
    pub participant_ids: BTreeSet<String>,
    #[serde(rename = "variables")]
    pub variable_ids: Vec<String>,
}

impl SubsetSpec {
    pub fn new<P, V>(id: u32, participants: P, variables: V) -> Self
    where
        P: IntoIterator,
        P::Item: Into<String>,
        V: IntoIterator,
        V::Item: Into<String>,
    {
        Self {
            id,
            participant_ids: participants.into_iter().map(Into::into).collect(),
            variable_ids: variables.into_iter().map(Into::into).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn p(&self) -> usize {
        self.variable_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetFile {
    pub subsets: Vec<SubsetSpec>,
}

/// Checks ids are unique, blocks are non-empty, and no variable is shared.
pub fn validate_subsets(subsets: &[SubsetSpec]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut vars = HashSet::new();
    for s in subsets {
        if !ids.insert(s.id) {
            return Err(Error::Schema(format!("duplicate subset id {}", s.id)));
        }
        if s.participant_ids.is_empty() || s.variable_ids.is_empty() {
            return Err(Error::Schema(format!("subset {} has no participants or no variables", s.id)));
        }
        for v in &s.variable_ids {
            if !vars.insert(v.as_str()) {
                return Err(Error::Schema(format!("variable `{v}` belongs to more than one subset")));
            }
        }
    }
    Ok(())
}

pub fn load_subsets(path: &Path) -> Result<Vec<SubsetSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SubsetFile = serde_json::from_str(&text)?;
    validate_subsets(&file.subsets)?;
    Ok(file.subsets)
}

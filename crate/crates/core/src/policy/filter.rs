//! Candidate filters: minimum interatomic distance and uniqueness against an archive.

use serde::{Deserialize, Serialize};

use super::CandidateBatch;
use crate::archive::StructureArchive;
use crate::chem::{ChemError, Structure};
use crate::geometry::min_pair_distance;

/// Filter settings. The uniqueness filter matches with the archive's own policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Å
    pub min_distance: f64,
    pub distance: bool,
    pub uniqueness: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            min_distance: 0.5,
            distance: true,
            uniqueness: true,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(format!("filters.min_distance must be positive, got {}", self.min_distance));
        }
        Ok(())
    }

    pub fn passes_distance(&self, s: &Structure) -> bool {
        !self.distance || min_pair_distance(s) >= self.min_distance
    }

    pub fn passes_uniqueness(&self, s: &Structure, seen: &StructureArchive) -> Result<bool, ChemError> {
        Ok(!self.uniqueness || !seen.contains_match(s)?)
    }

    pub fn passes(&self, s: &Structure, seen: &StructureArchive) -> Result<bool, ChemError> {
        Ok(self.passes_distance(s) && self.passes_uniqueness(s, seen)?)
    }
}

/// Keeps, in order, the structures that pass every enabled filter.
pub fn apply_filters(batch: CandidateBatch, spec: &FilterSpec, seen: &StructureArchive) -> Result<CandidateBatch, ChemError> {
    let mut kept = Vec::with_capacity(batch.structures.len());
    for s in batch.structures {
        if spec.passes(&s, seen)? {
            kept.push(s);
        }
    }
    Ok(CandidateBatch {
        structures: kept,
        ..batch
    })
}

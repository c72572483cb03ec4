//! Discovery policies: planner, generator, filters and selector composed into a
//! pipeline, plus an external-process policy.

pub mod external;
pub mod filter;
pub mod generator;
pub mod pipeline;
pub mod planner;
pub mod selector;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::StructureArchive;
use crate::chem::{ChemError, ChemicalSystem, Composition, Structure};
use crate::hull::{HullError, HullState};
use crate::oracle::OracleError;
use crate::plugin::PluginError;

pub use external::{ExternalPolicy, ExternalPolicySpec};
pub use filter::{apply_filters, FilterSpec};
pub use generator::{generate_random, GeneratorSpec};
pub use pipeline::{build_policy, PipelinePolicy, PolicySpec};
pub use planner::{plan_diversity, plan_random, PlannerSpec};
pub use selector::{select_random, select_surrogate, SelectorSpec, SurrogatePool};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("composition space is empty")]
    EmptyCompositionSpace,
    #[error("no candidate structure survived after {0} attempts")]
    NoValidCandidate(usize),
    #[error("candidate pool is exhausted")]
    EmptyPool,
    #[error("external policy returned an invalid structure twice: {0}")]
    InvalidProposal(String),
    #[error("invalid policy spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Plugin(#[from] PluginError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// One evaluated query as seen by a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub t: usize,
    pub structure: Structure,
    /// eV/atom
    pub energy_per_atom: f64,
    /// eV/atom, at evaluation time
    pub e_above_hull: f64,
    pub stable: bool,
    pub unique: bool,
    pub novel: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationHistory {
    records: Vec<HistoryRecord>,
}

impl EvaluationHistory {
    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record; query indices must continue the 1-based sequence.
    pub fn push(&mut self, record: HistoryRecord) {
        assert_eq!(record.t, self.records.len() + 1, "query indices are consecutive from 1");
        self.records.push(record);
    }
}

/// Attempt and success counts of one reduced formula.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulaStats {
    pub reduced: Composition,
    pub attempts: u32,
    /// evaluations that were stable and novel
    pub successes: u32,
}

/// Exploration bookkeeping keyed by reduced formula.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannerState {
    stats: BTreeMap<String, FormulaStats>,
}

impl PlannerState {
    pub fn record(&mut self, composition: &Composition, success: bool) {
        let reduced = composition.reduce();
        let entry = self.stats.entry(reduced.to_string()).or_insert(FormulaStats {
            reduced,
            attempts: 0,
            successes: 0,
        });
        entry.attempts += 1;
        if success {
            entry.successes += 1;
        }
    }

    pub fn get(&self, composition: &Composition) -> Option<&FormulaStats> {
        self.stats.get(&composition.reduced_formula())
    }

    pub fn attempts(&self, composition: &Composition) -> u32 {
        self.get(composition).map_or(0, |s| s.attempts)
    }

    pub fn success_rate(&self, composition: &Composition) -> f64 {
        match self.get(composition) {
            Some(s) if s.attempts > 0 => f64::from(s.successes) / f64::from(s.attempts),
            _ => 0.0,
        }
    }

    pub fn attempted(&self) -> impl Iterator<Item = &FormulaStats> {
        self.stats.values()
    }
}

/// Structures generated for one composition.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub composition: Composition,
    pub structures: Vec<Structure>,
    pub provenance: String,
}

/// What a policy sees when asked for the next structure.
pub struct PolicyContext<'a> {
    pub system: &'a ChemicalSystem,
    pub history: &'a EvaluationHistory,
    pub hull: &'a HullState,
    pub archive: &'a StructureArchive,
    pub budget_remaining: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub structure: Structure,
    /// true when the filters could not be satisfied and a best-effort structure was used
    pub fallback: bool,
}

pub trait Policy: Send {
    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Proposal, PolicyError>;

    /// Called once per evaluated query, after the hull update.
    fn observe(&mut self, _record: &HistoryRecord) {}
}

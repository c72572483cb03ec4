//! Selectors: uniform choice from a batch, or greedy surrogate ranking over a
//! pregenerated pool.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateBatch, PolicyError};
use crate::archive::StructureArchive;
use crate::chem::{ChemicalSystem, Structure};
use crate::hull::HullState;
use crate::oracle::{Surrogate, SyntheticOracleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectorSpec {
    Random,
    Surrogate {
        /// eV/atom
        #[serde(default = "default_noise_sigma")]
        noise_sigma: f64,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
        /// derived from the episode seed when absent
        #[serde(default)]
        noise_seed: Option<u64>,
        /// defaults to the episode's synthetic oracle
        #[serde(default)]
        base: Option<SyntheticOracleSpec>,
    },
}

fn default_noise_sigma() -> f64 {
    0.05
}

fn default_pool_size() -> usize {
    1024
}

impl Default for SelectorSpec {
    fn default() -> Self {
        SelectorSpec::Random
    }
}

impl SelectorSpec {
    pub fn surrogate(noise_sigma: f64) -> Self {
        SelectorSpec::Surrogate {
            noise_sigma,
            pool_size: default_pool_size(),
            noise_seed: None,
            base: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            SelectorSpec::Random => Ok(()),
            SelectorSpec::Surrogate { noise_sigma, pool_size, .. } => {
                if !(*noise_sigma >= 0.0 && noise_sigma.is_finite()) {
                    return Err(format!("selector.noise_sigma must be non-negative, got {noise_sigma}"));
                }
                if *pool_size == 0 {
                    return Err("selector.pool_size must be at least 1".into());
                }
                Ok(())
            }
        }
    }
}

/// Uniform draw from a nonempty batch.
pub fn select_random<R: Rng + ?Sized>(batch: &CandidateBatch, rng: &mut R) -> Result<Structure, PolicyError> {
    if batch.structures.is_empty() {
        return Err(PolicyError::EmptyPool);
    }
    Ok(batch.structures[rng.gen_range(0..batch.structures.len())].clone())
}

#[derive(Debug, Clone)]
struct PoolItem {
    structure: Structure,
    formula: String,
    vector: Vec<f64>,
    /// eV/atom
    predicted: f64,
}

/// Candidates scored once by the surrogate, consumed in greedy order.
#[derive(Debug, Clone)]
pub struct SurrogatePool {
    items: Vec<Option<PoolItem>>,
}

impl SurrogatePool {
    /// Scores every structure of `batches`; generation order is kept for tie-breaks.
    pub fn new(batches: Vec<CandidateBatch>, surrogate: &Surrogate, system: &ChemicalSystem) -> Result<Self, PolicyError> {
        let mut items = Vec::new();
        for batch in batches {
            let vector = batch.composition.vector(system)?;
            let formula = batch.composition.reduced_formula();
            for s in batch.structures {
                let predicted = surrogate.energy(&s)?;
                items.push(Some(PoolItem {
                    structure: s,
                    formula: formula.clone(),
                    vector: vector.clone(),
                    predicted,
                }));
            }
        }
        Ok(SurrogatePool { items })
    }

    pub fn remaining(&self) -> usize {
        self.items.iter().filter(|i| i.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    /// Surrogate predictions of the remaining items, in generation order.
    pub fn predictions(&self) -> Vec<(Structure, f64)> {
        self.items
            .iter()
            .flatten()
            .map(|i| (i.structure.clone(), i.predicted))
            .collect()
    }
}

/// Removes and returns the remaining structure with the lowest predicted energy above
/// the current hull. Items matching `seen` are discarded first; the earliest-generated
/// structure wins ties.
pub fn select_surrogate(
    pool: &mut SurrogatePool,
    hull: &HullState,
    seen: Option<&StructureArchive>,
) -> Result<Structure, PolicyError> {
    let mut hull_at: HashMap<String, f64> = HashMap::new();
    let mut best: Option<(usize, f64)> = None;
    for idx in 0..pool.items.len() {
        let Some(item) = &pool.items[idx] else { continue };
        if let Some(archive) = seen {
            if archive.contains_match(&item.structure)? {
                pool.items[idx] = None;
                continue;
            }
        }
        let h = match hull_at.get(&item.formula) {
            Some(h) => *h,
            None => {
                let h = hull.hull_energy_at(&item.vector, None)?.energy;
                hull_at.insert(item.formula.clone(), h);
                h
            }
        };
        let score = item.predicted - h;
        if best.map_or(true, |(_, b)| score < b) {
            best = Some((idx, score));
        }
    }
    let (idx, _) = best.ok_or(PolicyError::EmptyPool)?;
    Ok(pool.items[idx].take().expect("selected item is live").structure)
}

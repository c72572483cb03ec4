//! Composition planners.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PlannerState, PolicyError};
use crate::chem::{ChemicalSystem, Composition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlannerSpec {
    Random,
    Diversity {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_unattempted_weight")]
        unattempted_weight: f64,
    },
}

fn default_alpha() -> f64 {
    0.7
}

fn default_beta() -> f64 {
    0.3
}

fn default_unattempted_weight() -> f64 {
    5.0
}

impl Default for PlannerSpec {
    fn default() -> Self {
        PlannerSpec::Random
    }
}

impl PlannerSpec {
    pub fn diversity() -> Self {
        PlannerSpec::Diversity {
            alpha: default_alpha(),
            beta: default_beta(),
            unattempted_weight: default_unattempted_weight(),
        }
    }
}

/// Uniform draw over the enumerated compositions.
pub fn plan_random<R: Rng + ?Sized>(compositions: &[Composition], rng: &mut R) -> Result<Composition, PolicyError> {
    if compositions.is_empty() {
        return Err(PolicyError::EmptyCompositionSpace);
    }
    Ok(compositions[rng.gen_range(0..compositions.len())].clone())
}

/// Weights of the exploration score `w(c) * D(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub unattempted_weight: f64,
}

impl Default for DiversityWeights {
    fn default() -> Self {
        DiversityWeights {
            alpha: default_alpha(),
            beta: default_beta(),
            unattempted_weight: default_unattempted_weight(),
        }
    }
}

impl DiversityWeights {
    /// `unattempted_weight` for unseen formulas, else `alpha / (n + 1) + beta * (1 - r)`.
    pub fn weight(&self, state: &PlannerState, c: &Composition) -> f64 {
        match state.get(c) {
            Some(s) if s.attempts > 0 => {
                let rate = f64::from(s.successes) / f64::from(s.attempts);
                self.alpha / (f64::from(s.attempts) + 1.0) + self.beta * (1.0 - rate)
            }
            _ => self.unattempted_weight,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Coverage-seeking planner over a fixed enumeration of the composition space.
#[derive(Debug, Clone)]
pub struct DiversityPlanner {
    system: ChemicalSystem,
    compositions: Vec<Composition>,
    vectors: Vec<Vec<f64>>,
    formulas: Vec<String>,
    weights: DiversityWeights,
}

impl DiversityPlanner {
    pub fn new(system: &ChemicalSystem, weights: DiversityWeights) -> Self {
        let compositions = system.enumerate_compositions();
        let vectors = compositions
            .iter()
            .map(|c| c.vector(system).expect("enumerated compositions lie in the system"))
            .collect();
        let formulas = compositions.iter().map(|c| c.reduced_formula()).collect();
        DiversityPlanner {
            system: system.clone(),
            compositions,
            vectors,
            formulas,
            weights,
        }
    }

    pub fn compositions(&self) -> &[Composition] {
        &self.compositions
    }

    /// Reference points: attempted formulas plus the elemental end members.
    fn references(&self, state: &PlannerState) -> Vec<(String, Vec<f64>)> {
        let mut refs: Vec<(String, Vec<f64>)> = self
            .system
            .elements()
            .iter()
            .map(|el| (el.symbol().to_string(), self.system.vertex(*el).expect("system element")))
            .collect();
        for s in state.attempted() {
            if let Ok(v) = s.reduced.vector(&self.system) {
                refs.push((s.reduced.to_string(), v));
            }
        }
        refs
    }

    /// Minimum distance from composition `i` to the references with a different reduced
    /// formula.
    pub fn distance(&self, i: usize, refs: &[(String, Vec<f64>)]) -> f64 {
        refs.iter()
            .filter(|(f, _)| *f != self.formulas[i])
            .map(|(_, v)| euclidean(&self.vectors[i], v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Scores `w(c) * D(c)` for every enumerated composition.
    pub fn scores(&self, state: &PlannerState) -> Vec<f64> {
        let refs = self.references(state);
        (0..self.compositions.len())
            .map(|i| self.weights.weight(state, &self.compositions[i]) * self.distance(i, &refs))
            .collect()
    }

    /// Highest-scoring composition; ties go to the earliest in enumeration order (fewest
    /// atoms, then lexicographic count tuple).
    pub fn plan(&self, state: &PlannerState) -> Result<Composition, PolicyError> {
        let scores = self.scores(state);
        let mut best: Option<usize> = None;
        for (i, s) in scores.iter().enumerate() {
            if best.map_or(true, |b| *s > scores[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.compositions[i].clone())
            .ok_or(PolicyError::EmptyCompositionSpace)
    }
}

pub fn plan_diversity(
    system: &ChemicalSystem,
    state: &PlannerState,
    weights: DiversityWeights,
) -> Result<Composition, PolicyError> {
    DiversityPlanner::new(system, weights).plan(state)
}

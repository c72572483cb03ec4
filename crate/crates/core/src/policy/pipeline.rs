//! Planner → generator → filters → selector, assembled from a declarative spec.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::external::{ExternalPolicy, ExternalPolicySpec};
use super::filter::{apply_filters, FilterSpec};
use super::generator::{generate_random, GeneratorSpec};
use super::planner::{plan_random, DiversityPlanner, DiversityWeights, PlannerSpec};
use super::selector::{select_random, select_surrogate, SelectorSpec, SurrogatePool};
use super::{HistoryRecord, PlannerState, Policy, PolicyContext, PolicyError, Proposal};
use crate::chem::{ChemicalSystem, Composition, Structure};
use crate::geometry::min_pair_distance;
use crate::oracle::{Surrogate, SurrogateSpec, SyntheticOracleSpec};
use crate::seed;

/// A named policy: either a component pipeline or an external process. Pipeline fields
/// are ignored when `external` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub selector: SelectorSpec,
    #[serde(default)]
    pub filters: FilterSpec,
    /// regenerations after an empty filtered batch
    #[serde(default = "default_retries")]
    pub retries: usize,
    /// propose a best-effort structure instead of failing once retries run out
    #[serde(default = "default_fallback")]
    pub fallback: bool,
    #[serde(default)]
    pub external: Option<ExternalPolicySpec>,
}

fn default_retries() -> usize {
    8
}

fn default_fallback() -> bool {
    true
}

impl PolicySpec {
    pub fn new(name: &str, planner: PlannerSpec, selector: SelectorSpec) -> Self {
        PolicySpec {
            name: name.to_string(),
            planner,
            generator: GeneratorSpec::default(),
            selector,
            filters: FilterSpec::default(),
            retries: default_retries(),
            fallback: default_fallback(),
            external: None,
        }
    }

    /// Random planner, random generator, random selector.
    pub fn random(name: &str) -> Self {
        Self::new(name, PlannerSpec::Random, SelectorSpec::Random)
    }

    pub fn diversity(name: &str) -> Self {
        Self::new(name, PlannerSpec::diversity(), SelectorSpec::Random)
    }

    pub fn surrogate(name: &str, noise_sigma: f64) -> Self {
        Self::new(name, PlannerSpec::Random, SelectorSpec::surrogate(noise_sigma))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("policy name is empty".into());
        }
        if let Some(ext) = &self.external {
            return ext.validate();
        }
        self.generator.validate()?;
        self.selector.validate()?;
        self.filters.validate()?;
        if let PlannerSpec::Diversity {
            alpha,
            beta,
            unattempted_weight,
        } = &self.planner
        {
            if [alpha, beta, unattempted_weight].iter().any(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(format!("policy {}: planner weights must be non-negative", self.name));
            }
        }
        if matches!(self.selector, SelectorSpec::Surrogate { .. }) && self.planner != PlannerSpec::Random {
            return Err(format!("policy {}: the surrogate selector requires the random planner", self.name));
        }
        Ok(())
    }
}

enum Planner {
    Random(Vec<Composition>),
    Diversity(DiversityPlanner),
}

enum Selector {
    Random,
    Surrogate {
        surrogate: Surrogate,
        pool_size: usize,
        pool: Option<SurrogatePool>,
    },
}

pub struct PipelinePolicy {
    spec: PolicySpec,
    system: ChemicalSystem,
    rng: ChaCha8Rng,
    planner: Planner,
    selector: Selector,
    state: PlannerState,
}

impl PipelinePolicy {
    /// `oracle` supplies the surrogate's base model when the selector spec has none.
    pub fn new(
        spec: &PolicySpec,
        system: &ChemicalSystem,
        seed: u64,
        oracle: Option<&SyntheticOracleSpec>,
    ) -> Result<Self, PolicyError> {
        spec.validate().map_err(PolicyError::Spec)?;
        let planner = match &spec.planner {
            PlannerSpec::Random => Planner::Random(system.enumerate_compositions()),
            PlannerSpec::Diversity {
                alpha,
                beta,
                unattempted_weight,
            } => Planner::Diversity(DiversityPlanner::new(
                system,
                DiversityWeights {
                    alpha: *alpha,
                    beta: *beta,
                    unattempted_weight: *unattempted_weight,
                },
            )),
        };
        let selector = match &spec.selector {
            SelectorSpec::Random => Selector::Random,
            SelectorSpec::Surrogate {
                noise_sigma,
                pool_size,
                noise_seed,
                base,
            } => {
                let base = base.clone().or_else(|| oracle.cloned()).ok_or_else(|| {
                    PolicyError::Spec(format!(
                        "policy {}: surrogate selector needs a base model when the oracle is external",
                        spec.name
                    ))
                })?;
                let surrogate = Surrogate::new(&SurrogateSpec {
                    base,
                    noise_sigma: *noise_sigma,
                    noise_seed: noise_seed.unwrap_or_else(|| seed::derive("surrogate-noise-seed", &[seed])),
                })?;
                Selector::Surrogate {
                    surrogate,
                    pool_size: *pool_size,
                    pool: None,
                }
            }
        };
        Ok(PipelinePolicy {
            spec: spec.clone(),
            system: system.clone(),
            rng: seed::rng(seed::derive("policy", &[seed])),
            planner,
            selector,
            state: PlannerState::default(),
        })
    }

    pub fn planner_state(&self) -> &PlannerState {
        &self.state
    }

    fn plan(&mut self) -> Result<Composition, PolicyError> {
        match &self.planner {
            Planner::Random(all) => plan_random(all, &mut self.rng),
            Planner::Diversity(p) => p.plan(&self.state),
        }
    }

    /// Pregenerates the surrogate pool: batches of `batch_size` over random compositions,
    /// distance-filtered, then scored.
    fn build_pool(&mut self, surrogate: &Surrogate, pool_size: usize) -> Result<SurrogatePool, PolicyError> {
        let compositions = self.system.enumerate_compositions();
        let mut batches = Vec::new();
        let mut remaining = pool_size;
        let distance_only = FilterSpec {
            uniqueness: false,
            ..self.spec.filters.clone()
        };
        while remaining > 0 {
            let n = remaining.min(self.spec.generator.batch_size);
            let c = plan_random(&compositions, &mut self.rng)?;
            let mut batch = generate_random(&c, n, &self.system, &mut self.rng);
            batch.structures.retain(|s| distance_only.passes_distance(s));
            batches.push(batch);
            remaining -= n;
        }
        SurrogatePool::new(batches, surrogate, &self.system)
    }

    fn propose_batched(&mut self, ctx: &PolicyContext<'_>) -> Result<Proposal, PolicyError> {
        let composition = self.plan()?;
        let mut generated: Vec<Structure> = Vec::new();
        for _ in 0..=self.spec.retries {
            let batch = generate_random(&composition, self.spec.generator.batch_size, &self.system, &mut self.rng);
            let filtered = apply_filters(batch.clone(), &self.spec.filters, ctx.archive)?;
            if !filtered.structures.is_empty() {
                let structure = select_random(&filtered, &mut self.rng)?;
                return Ok(Proposal { structure, fallback: false });
            }
            generated.extend(batch.structures);
        }
        if !self.spec.fallback {
            return Err(PolicyError::NoValidCandidate(self.spec.retries + 1));
        }
        let structure = best_effort(generated, &self.spec.filters).ok_or(PolicyError::NoValidCandidate(0))?;
        log::warn!(
            "policy {}: no unique candidate for {} after {} batches, using fallback",
            self.spec.name,
            composition,
            self.spec.retries + 1
        );
        Ok(Proposal { structure, fallback: true })
    }
}

/// First structure passing the distance filter, else the one with the widest spacing.
fn best_effort(generated: Vec<Structure>, filters: &FilterSpec) -> Option<Structure> {
    if let Some(i) = generated.iter().position(|s| filters.passes_distance(s)) {
        return generated.into_iter().nth(i);
    }
    let mut best: Option<(f64, Structure)> = None;
    for s in generated {
        let d = min_pair_distance(&s);
        if best.as_ref().map_or(true, |(bd, _)| d > *bd) {
            best = Some((d, s));
        }
    }
    best.map(|(_, s)| s)
}

impl Policy for PipelinePolicy {
    fn propose(&mut self, ctx: &PolicyContext<'_>) -> Result<Proposal, PolicyError> {
        match &mut self.selector {
            Selector::Random => self.propose_batched(ctx),
            Selector::Surrogate { .. } => {
                let Selector::Surrogate {
                    surrogate,
                    pool_size,
                    mut pool,
                } = std::mem::replace(&mut self.selector, Selector::Random)
                else {
                    unreachable!()
                };
                let result = (|| {
                    if pool.is_none() {
                        pool = Some(self.build_pool(&surrogate, pool_size)?);
                    }
                    let seen = self.spec.filters.uniqueness.then_some(ctx.archive);
                    select_surrogate(pool.as_mut().expect("pool built"), ctx.hull, seen)
                })();
                self.selector = Selector::Surrogate {
                    surrogate,
                    pool_size,
                    pool,
                };
                Ok(Proposal {
                    structure: result?,
                    fallback: false,
                })
            }
        }
    }

    fn observe(&mut self, record: &HistoryRecord) {
        self.state.record(&record.structure.composition(), record.stable && record.novel);
    }
}

/// Instantiates the policy described by `spec` for one episode.
pub fn build_policy(
    spec: &PolicySpec,
    system: &ChemicalSystem,
    seed: u64,
    oracle: Option<&SyntheticOracleSpec>,
) -> Result<Box<dyn Policy>, PolicyError> {
    match &spec.external {
        Some(ext) => Ok(Box::new(ExternalPolicy::spawn(ext)?)),
        None => Ok(Box::new(PipelinePolicy::new(spec, system, seed, oracle)?)),
    }
}

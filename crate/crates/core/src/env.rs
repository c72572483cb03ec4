//! The discovery episode: seed the hull with elemental vertices and the initial known
//! structures, then repeat propose → evaluate → update hull → record for `budget` queries.
//!
//! An episode is a pure function of its config. Wall-clock timings are returned beside
//! the log, never inside it, so logs of identical configs are byte-identical.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{Fingerprint, StructureArchive};
use crate::chem::{ChemError, ChemicalSystem, Structure};
use crate::geometry::MatchPolicy;
use crate::hull::{HullError, HullState, Origin};
use crate::io::{read_structure_set, IngestError};
use crate::oracle::{ExternalOracle, Oracle, OracleError, SyntheticOracle, SyntheticOracleSpec};
use crate::plugin::DEFAULT_TIMEOUT;
use crate::policy::{build_policy, EvaluationHistory, HistoryRecord, Policy, PolicyContext, PolicyError, PolicySpec};
use crate::seed;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid episode config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("corrupted episode log: {0}")]
    Log(String),
    #[error("replay diverged from the log: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalOracleSpec {
    pub command: Vec<String>,
    /// seconds per request
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Synthetic(SyntheticOracleSpec),
    External(ExternalOracleSpec),
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Synthetic(SyntheticOracleSpec::default())
    }
}

impl OracleSpec {
    pub fn synthetic(&self) -> Option<&SyntheticOracleSpec> {
        match self {
            OracleSpec::Synthetic(s) => Some(s),
            OracleSpec::External(_) => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            OracleSpec::Synthetic(s) => s.validate().map_err(|e| e.to_string()),
            OracleSpec::External(e) => {
                if e.command.is_empty() {
                    return Err("oracle command is empty".into());
                }
                if !(e.timeout_s > 0.0 && e.timeout_s.is_finite()) {
                    return Err(format!("oracle timeout_s must be positive, got {}", e.timeout_s));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn Oracle>, OracleError> {
        match self {
            OracleSpec::Synthetic(s) => Ok(Box::new(SyntheticOracle::new(s.clone())?)),
            OracleSpec::External(e) => Ok(Box::new(ExternalOracle::spawn(
                &e.command,
                Duration::from_secs_f64(e.timeout_s),
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub system: ChemicalSystem,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// eV/atom
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    /// structure-set file of initial known structures
    #[serde(default)]
    pub h0_file: Option<PathBuf>,
    /// initial known structures given inline, evaluated after those of `h0_file`
    #[serde(default)]
    pub h0_structures: Vec<Structure>,
    #[serde(default)]
    pub oracle: OracleSpec,
    pub policy: PolicySpec,
    #[serde(default)]
    pub match_policy: MatchPolicy,
}

fn default_budget() -> usize {
    50
}

fn default_epsilon() -> f64 {
    0.1
}

impl EpisodeConfig {
    pub fn new(system: ChemicalSystem, policy: PolicySpec, seed: u64) -> Self {
        EpisodeConfig {
            system,
            budget: default_budget(),
            epsilon: default_epsilon(),
            seed,
            h0_file: None,
            h0_structures: Vec::new(),
            oracle: OracleSpec::default(),
            policy,
            match_policy: MatchPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.budget == 0 {
            return Err(EnvError::Config("budget must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(EnvError::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        self.oracle.validate().map_err(EnvError::Config)?;
        self.policy.validate().map_err(EnvError::Config)?;
        self.match_policy.validate().map_err(EnvError::Config)?;
        Ok(())
    }

    /// H_0 structures from the file (if any) followed by the inline ones.
    pub fn initial_structures(&self) -> Result<Vec<Structure>, EnvError> {
        let mut out = match &self.h0_file {
            Some(p) => read_structure_set(p, Some(&self.system))?,
            None => Vec::new(),
        };
        for (i, s) in self.h0_structures.iter().enumerate() {
            self.system
                .check_structure(s)
                .map_err(|e| EnvError::Config(format!("h0_structures[{i}]: {e}")))?;
            out.push(s.clone());
        }
        Ok(out)
    }

    pub fn policy_seed(&self) -> u64 {
        seed::derive("episode-policy", &[self.seed])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSource {
    Vertex,
    Known,
}

/// A hull entry present before the first query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEntry {
    pub entry_id: usize,
    pub source: InitialSource,
    /// structure as supplied, before relaxation (known structures only)
    pub input: Option<Structure>,
    pub structure: Structure,
    /// eV/atom
    pub energy_per_atom: f64,
}

/// One oracle query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub t: usize,
    pub entry_id: usize,
    pub proposed: Structure,
    pub relaxed: Structure,
    /// eV/atom
    pub energy_per_atom: f64,
    /// eV/atom, against the hull including this entry
    pub e_above_hull: f64,
    pub stable: bool,
    pub unique: bool,
    pub novel: bool,
    pub discovery: bool,
    /// cumulative discoveries D(t)
    pub discoveries: usize,
    pub fallback: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub engine_version: String,
    pub config: EpisodeConfig,
    pub initial_entries: Vec<InitialEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableEntry {
    pub entry_id: usize,
    pub formula: String,
    pub energy_per_atom: f64,
    pub e_above_hull: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    pub complete: bool,
    pub error: Option<String>,
    pub oracle_calls: usize,
    /// discoveries counted at evaluation time
    pub discoveries: usize,
    /// discoveries still within epsilon of the final hull
    pub final_hull_discoveries: usize,
    pub superseded: usize,
    pub final_stable: Vec<StableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header(LogHeader),
    Record(QueryRecord),
    Footer(LogFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub records: Vec<QueryRecord>,
    pub footer: LogFooter,
}

impl EpisodeLog {
    pub fn is_complete(&self) -> bool {
        self.footer.complete
    }

    /// Discovery curve D(t), t = 1..=records.
    pub fn curve(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.discoveries).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: LogLine| {
            out.push_str(&serde_json::to_string(&line).expect("log lines serialize"));
            out.push('\n');
        };
        push(LogLine::Header(self.header.clone()));
        for r in &self.records {
            push(LogLine::Record(r.clone()));
        }
        push(LogLine::Footer(self.footer.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EnvError> {
        let mut header = None;
        let mut records = Vec::new();
        let mut footer = None;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: LogLine =
                serde_json::from_str(line).map_err(|e| EnvError::Log(format!("line {}: {e}", n + 1)))?;
            match parsed {
                LogLine::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
                LogLine::Record(r) if header.is_some() && footer.is_none() => {
                    if r.t != records.len() + 1 {
                        return Err(EnvError::Log(format!("line {}: query index {} out of sequence", n + 1, r.t)));
                    }
                    records.push(r)
                }
                LogLine::Footer(f) if header.is_some() && footer.is_none() => footer = Some(f),
                _ => return Err(EnvError::Log(format!("line {}: unexpected line kind", n + 1))),
            }
        }
        Ok(EpisodeLog {
            header: header.ok_or_else(|| EnvError::Log("missing header".into()))?,
            records,
            footer: footer.ok_or_else(|| EnvError::Log("missing footer".into()))?,
        })
    }
}

/// Matching state: known structures (for novelty) and structures seen during the
/// episode (for uniqueness).
struct Archives {
    known: StructureArchive,
    episode: StructureArchive,
    /// union of both; what the policy filters against
    seen: StructureArchive,
}

impl Archives {
    fn new(policy: &MatchPolicy) -> Self {
        Archives {
            known: StructureArchive::new(policy.clone()),
            episode: StructureArchive::new(policy.clone()),
            seen: StructureArchive::new(policy.clone()),
        }
    }

    fn add_known(&mut self, s: &Structure) -> Result<(), ChemError> {
        let fp = self.known.fingerprint(s)?;
        self.known.insert_fingerprint(fp.clone());
        self.seen.insert_fingerprint(fp);
        Ok(())
    }

    fn add_episode(&mut self, fp: Fingerprint) {
        self.episode.insert_fingerprint(fp.clone());
        self.seen.insert_fingerprint(fp);
    }

    /// (unique, novel) for a freshly evaluated structure.
    fn flags(&self, fp: &Fingerprint) -> (bool, bool) {
        let unique = !self.episode.contains_fingerprint(fp);
        (unique, unique && !self.known.contains_fingerprint(fp))
    }
}

/// Mutable state of a running episode.
pub struct Environment {
    config: EpisodeConfig,
    oracle: Box<dyn Oracle>,
    hull: HullState,
    archives: Archives,
    history: EvaluationHistory,
    initial_entries: Vec<InitialEntry>,
    records: Vec<QueryRecord>,
    oracle_calls: usize,
}

impl Environment {
    /// Seeds vertices, evaluates the known structures through the oracle and builds the
    /// initial hull. Initialization queries do not count against the budget.
    pub fn initialize(config: &EpisodeConfig, mut oracle: Box<dyn Oracle>) -> Result<Self, EnvError> {
        config.validate()?;
        let known = config.initial_structures()?;
        let mut hull = HullState::new(config.system.clone(), config.epsilon, |el| oracle.elemental_reference(el))?;
        let mut archives = Archives::new(&config.match_policy);
        let mut initial_entries = Vec::new();
        for e in hull.entries() {
            archives.add_known(&e.structure)?;
            initial_entries.push(InitialEntry {
                entry_id: e.entry_id,
                source: InitialSource::Vertex,
                input: None,
                structure: e.structure.clone(),
                energy_per_atom: e.energy_per_atom,
            });
        }
        for s in known {
            let result = oracle.evaluate(&s)?;
            let outcome = hull.add_entry(result.relaxed.clone(), result.energy_per_atom, Origin::Initial)?;
            archives.add_known(&s)?;
            archives.add_known(&result.relaxed)?;
            initial_entries.push(InitialEntry {
                entry_id: outcome.entry_id,
                source: InitialSource::Known,
                input: Some(s),
                structure: result.relaxed,
                energy_per_atom: result.energy_per_atom,
            });
        }
        Ok(Environment {
            config: config.clone(),
            oracle,
            hull,
            archives,
            history: EvaluationHistory::default(),
            initial_entries,
            records: Vec::new(),
            oracle_calls: 0,
        })
    }

    pub fn hull(&self) -> &HullState {
        &self.hull
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls
    }

    pub fn seen(&self) -> &StructureArchive {
        &self.archives.seen
    }

    pub fn budget_remaining(&self) -> usize {
        self.config.budget - self.records.len()
    }

    /// One query: propose, evaluate, update the hull and record the outcome.
    pub fn step(&mut self, policy: &mut dyn Policy) -> Result<&QueryRecord, EnvError> {
        let t = self.records.len() + 1;
        let proposal = {
            let ctx = PolicyContext {
                system: &self.config.system,
                history: &self.history,
                hull: &self.hull,
                archive: &self.archives.seen,
                budget_remaining: self.budget_remaining(),
            };
            policy.propose(&ctx)?
        };
        self.config.system.check_structure(&proposal.structure)?;
        self.oracle_calls += 1;
        let result = self.oracle.evaluate(&proposal.structure)?;
        if result.relaxed.composition() != proposal.structure.composition() {
            return Err(EnvError::Oracle(OracleError::Spec(
                "oracle changed the composition during relaxation".into(),
            )));
        }

        let relaxed_fp = self.archives.seen.fingerprint(&result.relaxed)?;
        let (unique, novel) = self.archives.flags(&relaxed_fp);
        let outcome = self
            .hull
            .add_entry(result.relaxed.clone(), result.energy_per_atom, Origin::Proposed { query: t })?;
        let stable = outcome.stability.is_stable;
        let discovery = stable && unique && novel;
        let previous = self.records.last().map_or(0, |r| r.discoveries);

        let proposed_fp = self.archives.seen.fingerprint(&proposal.structure)?;
        self.archives.add_episode(proposed_fp);
        self.archives.add_episode(relaxed_fp);

        let record = QueryRecord {
            t,
            entry_id: outcome.entry_id,
            proposed: proposal.structure,
            relaxed: result.relaxed,
            energy_per_atom: result.energy_per_atom,
            e_above_hull: outcome.stability.e_above_hull,
            stable,
            unique,
            novel,
            discovery,
            discoveries: previous + usize::from(discovery),
            fallback: proposal.fallback,
            converged: result.converged,
        };
        let hist = HistoryRecord {
            t,
            structure: record.relaxed.clone(),
            energy_per_atom: record.energy_per_atom,
            e_above_hull: record.e_above_hull,
            stable,
            unique,
            novel,
        };
        self.history.push(hist.clone());
        policy.observe(&hist);
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    fn footer(&self, error: Option<String>) -> LogFooter {
        let complete = error.is_none() && self.records.len() == self.config.budget;
        let discoveries = self.records.last().map_or(0, |r| r.discoveries);
        let final_hull_discoveries = self
            .records
            .iter()
            .filter(|r| r.discovery)
            .filter(|r| self.hull.stability(r.entry_id).is_ok_and(|s| s.is_stable))
            .count();
        let final_stable = self
            .hull
            .stable_ids()
            .into_iter()
            .map(|id| {
                let e = &self.hull.entries()[id];
                StableEntry {
                    entry_id: id,
                    formula: e.structure.composition().reduced_formula(),
                    energy_per_atom: e.energy_per_atom,
                    e_above_hull: self.hull.stability(id).map_or(f64::NAN, |s| s.e_above_hull),
                }
            })
            .collect();
        LogFooter {
            complete,
            error,
            oracle_calls: self.oracle_calls,
            discoveries,
            final_hull_discoveries,
            superseded: discoveries - final_hull_discoveries,
            final_stable,
        }
    }

    pub fn into_log(self, error: Option<String>) -> (EpisodeLog, HullState) {
        let footer = self.footer(error);
        let log = EpisodeLog {
            header: LogHeader {
                engine_version: ENGINE_VERSION.to_string(),
                config: self.config,
                initial_entries: self.initial_entries,
            },
            records: self.records,
            footer,
        };
        (log, self.hull)
    }
}

/// Result of a full rollout. `timings` holds the wall time of each query in seconds.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub log: EpisodeLog,
    pub hull: HullState,
    pub timings: Vec<f64>,
}

/// Runs `budget` queries with the given components. Failures after initialization end
/// the episode early with an incomplete log instead of an error.
pub fn run_episode_with(
    config: &EpisodeConfig,
    oracle: Box<dyn Oracle>,
    policy: &mut dyn Policy,
) -> Result<EpisodeRun, EnvError> {
    let mut env = Environment::initialize(config, oracle)?;
    let mut timings = Vec::with_capacity(config.budget);
    let mut error = None;
    while env.records().len() < config.budget {
        let start = Instant::now();
        if let Err(e) = env.step(policy) {
            log::error!("episode (seed {}) stopped at query {}: {e}", config.seed, env.records().len() + 1);
            error = Some(e.to_string());
            break;
        }
        timings.push(start.elapsed().as_secs_f64());
    }
    let (log, hull) = env.into_log(error);
    Ok(EpisodeRun { log, hull, timings })
}

/// Builds the oracle and policy from `config` and runs the episode.
pub fn run_episode(config: &EpisodeConfig) -> Result<EpisodeRun, EnvError> {
    config.validate()?;
    let oracle = config.oracle.build()?;
    let mut policy = build_policy(
        &config.policy,
        &config.system,
        config.policy_seed(),
        config.oracle.synthetic(),
    )?;
    run_episode_with(config, oracle, policy.as_mut())
}

fn same<T: PartialEq + std::fmt::Debug>(what: &str, t: usize, logged: T, replayed: T) -> Result<(), EnvError> {
    if logged == replayed {
        Ok(())
    } else {
        Err(EnvError::Replay(format!("query {t}: {what} logged {logged:?}, recomputed {replayed:?}")))
    }
}

/// Output of [`replay`]: the recomputed curve D(1..=B) and the final hull.
#[derive(Debug, Clone)]
pub struct Replay {
    pub curve: Vec<usize>,
    pub hull: HullState,
}

/// Recomputes hull stability, matching flags and D(t) from logged structures and
/// energies and checks them against the log.
pub fn replay(log: &EpisodeLog) -> Result<Replay, EnvError> {
    if !log.is_complete() {
        return Err(EnvError::Replay("log is incomplete".into()));
    }
    let cfg = &log.header.config;
    if log.records.len() != cfg.budget {
        return Err(EnvError::Replay(format!("{} records for budget {}", log.records.len(), cfg.budget)));
    }
    let mut vertices = log
        .header
        .initial_entries
        .iter()
        .filter(|e| e.source == InitialSource::Vertex);
    let mut hull = HullState::new(cfg.system.clone(), cfg.epsilon, |el| {
        vertices
            .next()
            .map(|e| e.structure.clone())
            .unwrap_or_else(|| Structure::fcc(el, 4.0).expect("positive lattice constant"))
    })?;
    let mut archives = Archives::new(&cfg.match_policy);
    for e in &log.header.initial_entries {
        match e.source {
            InitialSource::Vertex => {
                if hull.entry(e.entry_id)?.structure != e.structure || e.energy_per_atom != 0.0 {
                    return Err(EnvError::Replay(format!("vertex entry {} does not match", e.entry_id)));
                }
            }
            InitialSource::Known => {
                let id = hull.add_entry(e.structure.clone(), e.energy_per_atom, Origin::Initial)?.entry_id;
                same("initial entry id", 0, e.entry_id, id)?;
                if let Some(input) = &e.input {
                    archives.add_known(input)?;
                }
            }
        }
        archives.add_known(&e.structure)?;
    }

    let mut curve = Vec::with_capacity(log.records.len());
    let mut d = 0;
    for r in &log.records {
        let fp = archives.seen.fingerprint(&r.relaxed)?;
        let (unique, novel) = archives.flags(&fp);
        let outcome = hull.add_entry(r.relaxed.clone(), r.energy_per_atom, Origin::Proposed { query: r.t })?;
        let stable = outcome.stability.is_stable;
        let discovery = stable && unique && novel;
        d += usize::from(discovery);
        same("entry id", r.t, r.entry_id, outcome.entry_id)?;
        same("e_above_hull", r.t, r.e_above_hull.to_bits(), outcome.stability.e_above_hull.to_bits())?;
        same("stable", r.t, r.stable, stable)?;
        same("unique", r.t, r.unique, unique)?;
        same("novel", r.t, r.novel, novel)?;
        same("discovery", r.t, r.discovery, discovery)?;
        same("D(t)", r.t, r.discoveries, d)?;
        archives.add_episode(archives.seen.fingerprint(&r.proposed)?);
        archives.add_episode(fp);
        curve.push(d);
    }
    same("discoveries", log.records.len(), log.footer.discoveries, d)?;
    Ok(Replay { curve, hull })
}

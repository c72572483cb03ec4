//! Campaigns: every (system × policy × epsilon × episode) cell of a declarative config,
//! run in parallel and persisted to a run directory.
//!
//! Run directory layout:
//!
//! ```text
//! manifest.json           config, seeds, cell status, timestamps
//! episodes/<cell>.jsonl   episode logs
//! phase_diagrams/<cell>.json
//! metrics.csv             one row per cell
//! aggregate.csv           mean/SEM per (system size, policy, epsilon)
//! af_series.csv           AF(k) for every reachable k
//! curves.csv              mean ± SEM discovery curves
//! timings.csv             wall time per query (not reproducible)
//! ```
//!
//! Everything except the manifest timestamps and timings.csv is a pure function of the
//! config, whatever the worker count.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::{ChemicalSystem, Element};
use crate::env::{replay, run_episode, EpisodeConfig, EpisodeLog, OracleSpec, ENGINE_VERSION};
use crate::geometry::MatchPolicy;
use crate::metrics::{
    aggregate, af_series, curve_summaries, episode_metrics, read_episode_metrics, write_af_series, write_aggregate,
    write_curves, write_episode_metrics, LabeledLog,
};
use crate::policy::PolicySpec;
use crate::seed;

pub const WORKERS_ENV: &str = "DISCOBENCH_WORKERS";

/// Elements of the intermetallic benchmark systems; no radioactive elements.
pub const DEFAULT_ELEMENT_POOL: [&str; 51] = [
    "Ag", "Al", "Au", "Ba", "Be", "Ca", "Cd", "Ce", "Co", "Cr", "Cs", "Dy", "Er", "Eu", "Fe", "Ga", "Gd", "Hf",
    "Hg", "Ho", "In", "Ir", "K", "Li", "Lu", "Mg", "Mn", "Na", "Nb", "Nd", "Ni", "Pb", "Pd", "Pt", "Rb", "Rh",
    "Ru", "Sc", "Sm", "Sn", "Sr", "Ta", "Tb", "Ti", "Tl", "Tm", "V", "W", "Y", "Zn", "Zr",
];

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_max_atoms() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub elements: Vec<Element>,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: u32,
    #[serde(default)]
    pub h0_file: Option<PathBuf>,
}

/// Randomly drawn systems, appended after the explicit ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub size: usize,
    pub count: usize,
    /// defaults to the campaign seed
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: u32,
    #[serde(default)]
    pub pool: Option<Vec<Element>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub systems: Vec<SystemSpec>,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    pub baseline: String,
    #[serde(default)]
    pub seed: u64,
    /// relative paths resolve against the config file's directory
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub match_policy: MatchPolicy,
    /// grid divisions per simplex edge in phase-diagram exports
    #[serde(default = "default_resolution")]
    pub phase_diagram_resolution: u32,
}

fn default_episodes() -> usize {
    5
}

fn default_budget() -> usize {
    50
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1]
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/campaign")
}

fn default_resolution() -> u32 {
    10
}

impl CampaignConfig {
    pub fn from_yaml(text: &str) -> Result<Self, CampaignError> {
        serde_yaml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    /// Reads, parses and validates a config file; relative paths are resolved against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_yaml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
        for s in &mut self.systems {
            if let Some(p) = &s.h0_file {
                if p.is_relative() {
                    s.h0_file = Some(base.join(p));
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.policies.is_empty() {
            return bad("no policies".into());
        }
        let mut names = HashSet::new();
        for p in &self.policies {
            p.validate().map_err(CampaignError::Config)?;
            if !names.insert(p.name.as_str()) {
                return bad(format!("duplicate policy name {}", p.name));
            }
        }
        if !names.contains(self.baseline.as_str()) {
            return bad(format!("baseline policy {} is not in the policy list", self.baseline));
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return bad("epsilons must be a nonempty list of non-negative numbers".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.oracle.validate().map_err(CampaignError::Config)?;
        self.match_policy.validate().map_err(CampaignError::Config)?;
        let systems = self.systems()?;
        if systems.is_empty() {
            return bad("no systems: give `systems` or `sample`".into());
        }
        let mut labels = HashSet::new();
        for (s, _) in &systems {
            if !labels.insert(s.label()) {
                return bad(format!("duplicate system {}", s.label()));
            }
        }
        Ok(())
    }

    /// Explicit systems followed by sampled ones, with their H_0 files.
    pub fn systems(&self) -> Result<Vec<(ChemicalSystem, Option<PathBuf>)>, CampaignError> {
        let mut out = Vec::new();
        for s in &self.systems {
            let sys = ChemicalSystem::new(s.elements.clone(), s.max_atoms).map_err(|e| CampaignError::Config(e.to_string()))?;
            out.push((sys, s.h0_file.clone()));
        }
        if let Some(sample) = &self.sample {
            let pool = match &sample.pool {
                Some(p) => p.clone(),
                None => default_pool(),
            };
            for sys in sample_systems(&pool, sample.size, sample.count, sample.seed.unwrap_or(self.seed), sample.max_atoms)? {
                out.push((sys, None));
            }
        }
        Ok(out)
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configs serialize");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    /// Worker count: environment override, then config, then available cores.
    pub fn worker_count(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|n| *n > 0)
            .or(self.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

pub fn default_pool() -> Vec<Element> {
    DEFAULT_ELEMENT_POOL
        .iter()
        .map(|s| Element::from_symbol(s).expect("pool symbols are valid"))
        .collect()
}

/// `count` distinct `size`-element subsets of `pool`, each drawn uniformly; elements
/// within a system are sorted by symbol.
pub fn sample_systems(
    pool: &[Element],
    size: usize,
    count: usize,
    seed: u64,
    max_atoms: u32,
) -> Result<Vec<ChemicalSystem>, CampaignError> {
    let mut unique_pool: Vec<Element> = Vec::new();
    for el in pool {
        if !unique_pool.contains(el) {
            unique_pool.push(*el);
        }
    }
    let n = unique_pool.len();
    if size < 2 || n < size {
        return Err(CampaignError::Config(format!(
            "cannot draw {size}-element systems from a pool of {n}"
        )));
    }
    let available = (0..size).fold(1f64, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    if (count as f64) > available.round() {
        return Err(CampaignError::Config(format!(
            "only {available} distinct {size}-element systems exist, {count} requested"
        )));
    }
    let mut rng = seed::rng(seed::derive("sample-systems", &[seed, size as u64]));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut els: Vec<Element> = sample(&mut rng, n, size).into_iter().map(|i| unique_pool[i]).collect();
        els.sort_by(|a, b| a.symbol().cmp(b.symbol()));
        if seen.insert(els.clone()) {
            out.push(ChemicalSystem::new(els, max_atoms).map_err(|e| CampaignError::Config(e.to_string()))?);
        }
    }
    Ok(out)
}

/// Seed of one cell; a pure function of its coordinates.
pub fn cell_seed(master: u64, system: &ChemicalSystem, policy: &str, episode: usize, epsilon: f64) -> u64 {
    seed::derive(
        "cell",
        &[
            master,
            seed::hash_str(&system.label()),
            seed::hash_str(policy),
            episode as u64,
            epsilon.to_bits(),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Complete,
    Incomplete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub system: String,
    pub policy: String,
    pub epsilon: f64,
    pub episode: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    /// relative to the run directory
    pub log: Option<PathBuf>,
    pub phase_diagram: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub config_hash: String,
    pub config: CampaignConfig,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub cells: Vec<CellRecord>,
}

impl RunManifest {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status != CellStatus::Complete).count()
    }

    pub fn load(run_dir: &Path) -> Result<Self, CampaignError> {
        let path = run_dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| CampaignError::Artifact {
            path,
            message: e.to_string(),
        })
    }
}

/// One unit of work.
#[derive(Debug, Clone)]
pub struct Cell {
    pub config: EpisodeConfig,
    pub policy: String,
    pub episode: usize,
}

impl Cell {
    pub fn file_stem(&self) -> String {
        format!(
            "{}__{}__eps{}__ep{}",
            self.config.system.label(),
            self.policy,
            self.config.epsilon,
            self.episode
        )
    }
}

/// Cells in canonical order: system, policy, epsilon, episode.
pub fn plan_cells(cfg: &CampaignConfig) -> Result<Vec<Cell>, CampaignError> {
    let mut cells = Vec::new();
    let mut seeds = HashSet::new();
    for (system, h0) in cfg.systems()? {
        for policy in &cfg.policies {
            for &epsilon in &cfg.epsilons {
                for episode in 0..cfg.episodes {
                    let seed = cell_seed(cfg.seed, &system, &policy.name, episode, epsilon);
                    if !seeds.insert(seed) {
                        return Err(CampaignError::Config("episode seed collision".into()));
                    }
                    cells.push(Cell {
                        config: EpisodeConfig {
                            system: system.clone(),
                            budget: cfg.budget,
                            epsilon,
                            seed,
                            h0_file: h0.clone(),
                            h0_structures: Vec::new(),
                            oracle: cfg.oracle.clone(),
                            policy: policy.clone(),
                            match_policy: cfg.match_policy.clone(),
                        },
                        policy: policy.name.clone(),
                        episode,
                    });
                }
            }
        }
    }
    Ok(cells)
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CampaignError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Runs every cell with `workers` threads and writes all artifacts to `cfg.output`.
pub fn run_campaign(cfg: &CampaignConfig, workers: usize) -> Result<RunManifest, CampaignError> {
    cfg.validate()?;
    let started_unix = now_unix();
    let cells = plan_cells(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CampaignError::Config(format!("thread pool: {e}")))?;
    log::info!("running {} cells on {} workers", cells.len(), workers.max(1));
    let results: Vec<_> = pool.install(|| cells.par_iter().map(|c| run_episode(&c.config)).collect());

    let out = &cfg.output;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut records = Vec::with_capacity(cells.len());
    let mut timings = csv::Writer::from_writer(Vec::new());
    timings
        .write_record(["cell", "t", "seconds"])
        .expect("in-memory csv");
    for (cell, result) in cells.iter().zip(results) {
        let stem = cell.file_stem();
        let mut record = CellRecord {
            system: cell.config.system.label(),
            policy: cell.policy.clone(),
            epsilon: cell.config.epsilon,
            episode: cell.episode,
            seed: cell.config.seed,
            status: CellStatus::Failed,
            error: None,
            log: None,
            phase_diagram: None,
        };
        match result {
            Ok(run) => {
                let log_rel = PathBuf::from("episodes").join(format!("{stem}.jsonl"));
                write(&out.join(&log_rel), run.log.to_jsonl())?;
                let pd_rel = PathBuf::from("phase_diagrams").join(format!("{stem}.json"));
                let pd = run
                    .hull
                    .export(cfg.phase_diagram_resolution)
                    .map_err(|e| CampaignError::Config(e.to_string()))?;
                write(&out.join(&pd_rel), serde_json::to_string_pretty(&pd).expect("phase diagrams serialize"))?;
                for (t, s) in run.timings.iter().enumerate() {
                    timings
                        .write_record([stem.clone(), (t + 1).to_string(), s.to_string()])
                        .expect("in-memory csv");
                }
                record.status = if run.log.is_complete() {
                    CellStatus::Complete
                } else {
                    CellStatus::Incomplete
                };
                record.error = run.log.footer.error.clone();
                record.log = Some(log_rel);
                record.phase_diagram = Some(pd_rel);
            }
            Err(e) => {
                log::error!("cell {stem} failed: {e}");
                record.error = Some(e.to_string());
            }
        }
        records.push(record);
    }
    write(&out.join("timings.csv"), timings.into_inner().expect("in-memory csv"))?;

    let manifest = RunManifest {
        engine_version: ENGINE_VERSION.to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        started_unix,
        finished_unix: now_unix(),
        cells: records,
    };
    write(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifests serialize"),
    )?;
    compute_metrics(out)?;
    emit_curves(out)?;
    Ok(manifest)
}

/// Episode logs of a run directory, in manifest order.
pub fn load_logs(run_dir: &Path) -> Result<(RunManifest, Vec<LabeledLog>), CampaignError> {
    let manifest = RunManifest::load(run_dir)?;
    let mut logs = Vec::new();
    for cell in &manifest.cells {
        let Some(rel) = &cell.log else { continue };
        let path = run_dir.join(rel);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let log = EpisodeLog::from_jsonl(&text).map_err(|e| CampaignError::Artifact {
            path: path.clone(),
            message: e.to_string(),
        })?;
        logs.push(LabeledLog {
            policy: cell.policy.clone(),
            episode: cell.episode,
            log,
        });
    }
    Ok((manifest, logs))
}

/// Recomputes metrics.csv, af_series.csv and aggregate.csv from the episode logs. The
/// aggregate is computed from the metrics file as written.
pub fn compute_metrics(run_dir: &Path) -> Result<(), CampaignError> {
    let (manifest, logs) = load_logs(run_dir)?;
    let baseline = &manifest.config.baseline;
    let artifact = |path: &Path, e: &dyn std::fmt::Display| CampaignError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let rows = episode_metrics(&logs, baseline).map_err(|e| artifact(run_dir, &e))?;
    let metrics_path = run_dir.join("metrics.csv");
    let mut buf = Vec::new();
    write_episode_metrics(&mut buf, &rows).map_err(|e| artifact(&metrics_path, &e))?;
    write(&metrics_path, &buf)?;

    let af_path = run_dir.join("af_series.csv");
    let mut buf = Vec::new();
    write_af_series(&mut buf, &af_series(&logs, baseline)).map_err(|e| artifact(&af_path, &e))?;
    write(&af_path, &buf)?;

    let text = fs::read(&metrics_path).map_err(io_err(&metrics_path))?;
    let reread = read_episode_metrics(text.as_slice()).map_err(|e| artifact(&metrics_path, &e))?;
    let agg_path = run_dir.join("aggregate.csv");
    let mut buf = Vec::new();
    write_aggregate(&mut buf, &aggregate(&reread)).map_err(|e| artifact(&agg_path, &e))?;
    write(&agg_path, &buf)
}

fn emit_curves(run_dir: &Path) -> Result<(), CampaignError> {
    let (_, logs) = load_logs(run_dir)?;
    let path = run_dir.join("curves.csv");
    let mut buf = Vec::new();
    write_curves(&mut buf, &curve_summaries(&logs)).map_err(|e| CampaignError::Artifact {
        path: path.clone(),
        message: e.to_string(),
    })?;
    write(&path, &buf)
}

/// Rewrites curves.csv and, by replaying every complete log, the phase-diagram exports.
pub fn emit_plot_data(run_dir: &Path) -> Result<(), CampaignError> {
    emit_curves(run_dir)?;
    let manifest = RunManifest::load(run_dir)?;
    for cell in manifest.cells.iter().filter(|c| c.status == CellStatus::Complete) {
        let (Some(log_rel), Some(pd_rel)) = (&cell.log, &cell.phase_diagram) else {
            continue;
        };
        let path = run_dir.join(log_rel);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let artifact = |e: &dyn std::fmt::Display| CampaignError::Artifact {
            path: path.clone(),
            message: e.to_string(),
        };
        let log = EpisodeLog::from_jsonl(&text).map_err(|e| artifact(&e))?;
        let replayed = replay(&log).map_err(|e| artifact(&e))?;
        let pd = replayed
            .hull
            .export(manifest.config.phase_diagram_resolution)
            .map_err(|e| artifact(&e))?;
        write(&run_dir.join(pd_rel), serde_json::to_string_pretty(&pd).expect("phase diagrams serialize"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_distinct_and_deterministic() {
        let pool = default_pool();
        let a = sample_systems(&pool, 3, 10, 7, 8).unwrap();
        let b = sample_systems(&pool, 3, 10, 7, 8).unwrap();
        assert_eq!(a, b);
        let labels: HashSet<String> = a.iter().map(|s| s.label()).collect();
        assert_eq!(labels.len(), 10);
        assert!(a.iter().all(|s| s.dim() == 3));
        let small: Vec<Element> = pool[..4].to_vec();
        assert_eq!(sample_systems(&small, 3, 4, 0, 8).unwrap().len(), 4);
        assert!(sample_systems(&small, 3, 5, 0, 8).is_err());
        assert!(sample_systems(&small, 5, 1, 0, 8).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_missing_baseline() {
        let ok = "systems: [{elements: [Fe, Al]}]\npolicies: [{name: random}]\nbaseline: random\n";
        let cfg = CampaignConfig::from_yaml(ok).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.episodes, 5);
        assert_eq!(cfg.budget, 50);
        assert_eq!(cfg.epsilons, vec![0.1]);
        assert!(CampaignConfig::from_yaml(&format!("{ok}budgte: 3\n")).is_err());
        let no_base = CampaignConfig::from_yaml(&ok.replace("baseline: random", "baseline: other")).unwrap();
        assert!(no_base.validate().is_err());
    }

    #[test]
    fn cell_seeds_are_pairwise_distinct() {
        let cfg = CampaignConfig::from_yaml(
            "sample: {size: 3, count: 4}\npolicies: [{name: a}, {name: b}]\nbaseline: a\nepisodes: 5\nepsilons: [0.1, 0.01]\n",
        )
        .unwrap();
        let cells = plan_cells(&cfg).unwrap();
        assert_eq!(cells.len(), 4 * 2 * 2 * 5);
        let seeds: HashSet<u64> = cells.iter().map(|c| c.config.seed).collect();
        assert_eq!(seeds.len(), cells.len());
    }
}

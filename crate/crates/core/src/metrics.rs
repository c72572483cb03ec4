//! Discovery metrics over episode logs and their aggregation across episodes.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::archive::Fingerprint;
use crate::chem::{composition_l1, ChemError, ChemicalSystem, Structure};
use crate::env::EpisodeLog;
use crate::geometry::MatchPolicy;

/// Cumulative discoveries D(0..=B) with D(0) = 0 and unit-or-zero increments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryCurve {
    values: Vec<usize>,
}

impl DiscoveryCurve {
    /// Builds from D(1..=B).
    pub fn new(after_each_query: &[usize]) -> Result<Self, String> {
        let mut values = Vec::with_capacity(after_each_query.len() + 1);
        values.push(0);
        values.extend_from_slice(after_each_query);
        for (t, w) in values.windows(2).enumerate() {
            if w[1] < w[0] || w[1] - w[0] > 1 {
                return Err(format!("D({}) = {} after D({}) = {}", t + 1, w[1], t, w[0]));
            }
        }
        Ok(DiscoveryCurve { values })
    }

    /// Builds from per-query discovery events.
    pub fn from_events(events: &[bool]) -> Self {
        let mut d = 0;
        let mut values = vec![0];
        for e in events {
            d += usize::from(*e);
            values.push(d);
        }
        DiscoveryCurve { values }
    }

    pub fn budget(&self) -> usize {
        self.values.len() - 1
    }

    /// D(0..=B)
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn at(&self, t: usize) -> usize {
        self.values[t]
    }

    pub fn total(&self) -> usize {
        *self.values.last().expect("curve holds D(0)")
    }

    /// Query index of the k-th discovery.
    pub fn time_to(&self, k: usize) -> Option<usize> {
        if k == 0 {
            return Some(0);
        }
        self.values.iter().position(|&d| d >= k)
    }
}

pub fn msun(curve: &DiscoveryCurve) -> f64 {
    if curve.budget() == 0 {
        return 0.0;
    }
    curve.total() as f64 / curve.budget() as f64
}

/// Normalized trapezoidal area under the curve; 1 for a discovery at every query.
pub fn audc(curve: &DiscoveryCurve) -> f64 {
    let b = curve.budget();
    if b == 0 {
        return 0.0;
    }
    let doubled: usize = curve.values.windows(2).map(|w| w[0] + w[1]).sum();
    doubled as f64 / (b * b) as f64
}

/// Query indices at which discoveries happened, increasing.
pub fn discovery_times(curve: &DiscoveryCurve) -> Vec<usize> {
    (1..curve.values.len())
        .filter(|&t| curve.values[t] > curve.values[t - 1])
        .collect()
}

/// `t_baseline(k) / t_policy(k)`. A baseline that never reaches `k` is charged its full
/// budget. `None` when the policy never reaches `k` or `k == 0`.
pub fn acceleration_factor(policy: &DiscoveryCurve, baseline: &DiscoveryCurve, k: usize) -> Option<f64> {
    if k == 0 {
        return None;
    }
    let tp = policy.time_to(k)?;
    let tb = baseline.time_to(k).unwrap_or(baseline.budget());
    Some(tb as f64 / tp as f64)
}

/// `D_policy(t) / D_baseline(t)`; `None` when the baseline has no discoveries by `t`.
pub fn enhancement_factor(policy: &DiscoveryCurve, baseline: &DiscoveryCurve, t: usize) -> Option<f64> {
    let db = *baseline.values.get(t)?;
    let dp = *policy.values.get(t)?;
    (db > 0).then(|| dp as f64 / db as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diversity {
    pub mean_comp_l1: f64,
    pub unique_reduced_compositions: usize,
    pub unique_structures_amd: usize,
    pub mean_pairwise_amd: f64,
}

/// Diversity of a set of structures: pairwise composition L1 and AMD L∞ means, distinct
/// reduced formulas, and AMD clusters (greedy, first structure of each cluster
/// represents it).
pub fn diversity(structures: &[Structure], system: &ChemicalSystem, policy: &MatchPolicy) -> Result<Diversity, ChemError> {
    let n = structures.len();
    if n == 0 {
        return Ok(Diversity::default());
    }
    let comps: Vec<_> = structures.iter().map(Structure::composition).collect();
    let fps = structures
        .iter()
        .map(|s| Fingerprint::of(s, policy))
        .collect::<Result<Vec<_>, _>>()?;
    let mut l1 = 0.0;
    let mut amd_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            l1 += composition_l1(&comps[i], &comps[j], system)?;
            amd_sum += fps[i].amd.linf(&fps[j].amd);
        }
    }
    let pairs = (n * (n - 1) / 2).max(1) as f64;
    let formulas: BTreeSet<String> = comps.iter().map(|c| c.reduced_formula()).collect();
    let mut representatives: Vec<&Fingerprint> = Vec::new();
    for fp in &fps {
        if !representatives.iter().any(|r| r.matches(fp, policy)) {
            representatives.push(fp);
        }
    }
    Ok(Diversity {
        mean_comp_l1: l1 / pairs,
        unique_reduced_compositions: formulas.len(),
        unique_structures_amd: representatives.len(),
        mean_pairwise_amd: amd_sum / pairs,
    })
}

/// Diversity over the discovered (mSUN) structures of an episode.
pub fn diversity_metrics(log: &EpisodeLog) -> Result<Diversity, ChemError> {
    let found: Vec<Structure> = log
        .records
        .iter()
        .filter(|r| r.discovery)
        .map(|r| r.relaxed.clone())
        .collect();
    let cfg = &log.header.config;
    diversity(&found, &cfg.system, &cfg.match_policy)
}

/// Distinct reduced formulas among all evaluated structures.
pub fn unique_evaluated_compositions(log: &EpisodeLog) -> usize {
    log.records
        .iter()
        .map(|r| r.proposed.composition().reduced_formula())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Per-episode scalar metrics before pairing with a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub curve: DiscoveryCurve,
    pub msun: f64,
    pub audc: f64,
    pub discovery_times: Vec<usize>,
    pub diversity: Diversity,
    pub unique_evaluated_compositions: usize,
}

pub fn report(log: &EpisodeLog) -> Result<MetricsReport, ChemError> {
    let curve = DiscoveryCurve::from_events(&log.records.iter().map(|r| r.discovery).collect::<Vec<_>>());
    Ok(MetricsReport {
        msun: msun(&curve),
        audc: audc(&curve),
        discovery_times: discovery_times(&curve),
        diversity: diversity_metrics(log)?,
        unique_evaluated_compositions: unique_evaluated_compositions(log),
        curve,
    })
}

/// One row of the per-episode metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub system: String,
    pub size: usize,
    pub policy: String,
    pub epsilon: f64,
    pub episode: usize,
    pub seed: u64,
    pub complete: bool,
    pub budget: usize,
    pub discoveries: usize,
    pub msun: f64,
    pub audc: f64,
    /// AF at k = this episode's final discovery count
    pub af: Option<f64>,
    pub af_k: usize,
    /// EF at t = budget
    pub ef: Option<f64>,
    pub final_hull_discoveries: usize,
    pub superseded: usize,
    pub fallbacks: usize,
    pub mean_comp_l1: f64,
    pub unique_reduced_compositions: usize,
    pub unique_structures_amd: usize,
    pub mean_pairwise_amd: f64,
    pub unique_evaluated_compositions: usize,
}

/// An episode log with its cell coordinates.
#[derive(Debug, Clone)]
pub struct LabeledLog {
    pub policy: String,
    pub episode: usize,
    pub log: EpisodeLog,
}

impl LabeledLog {
    fn key(&self) -> (String, u64, usize) {
        let cfg = &self.log.header.config;
        (cfg.system.label(), cfg.epsilon.to_bits(), self.episode)
    }
}

/// Per-episode metrics; AF and EF pair each episode with the baseline episode of the
/// same system, epsilon and index.
pub fn episode_metrics(logs: &[LabeledLog], baseline: &str) -> Result<Vec<EpisodeMetrics>, ChemError> {
    let reports = logs.iter().map(|l| report(&l.log)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(logs.len());
    for (l, r) in logs.iter().zip(&reports) {
        let cfg = &l.log.header.config;
        let complete = l.log.is_complete();
        let base = logs
            .iter()
            .zip(&reports)
            .find(|(b, _)| b.policy == baseline && b.key() == l.key() && b.log.is_complete())
            .map(|(_, br)| &br.curve);
        let k = r.curve.total();
        let (af, ef) = match (base, complete) {
            (Some(b), true) => (
                acceleration_factor(&r.curve, b, k),
                enhancement_factor(&r.curve, b, r.curve.budget()),
            ),
            _ => (None, None),
        };
        rows.push(EpisodeMetrics {
            system: cfg.system.label(),
            size: cfg.system.dim(),
            policy: l.policy.clone(),
            epsilon: cfg.epsilon,
            episode: l.episode,
            seed: cfg.seed,
            complete,
            budget: cfg.budget,
            discoveries: k,
            msun: r.msun,
            audc: r.audc,
            af,
            af_k: k,
            ef,
            final_hull_discoveries: l.log.footer.final_hull_discoveries,
            superseded: l.log.footer.superseded,
            fallbacks: l.log.records.iter().filter(|q| q.fallback).count(),
            mean_comp_l1: r.diversity.mean_comp_l1,
            unique_reduced_compositions: r.diversity.unique_reduced_compositions,
            unique_structures_amd: r.diversity.unique_structures_amd,
            mean_pairwise_amd: r.diversity.mean_pairwise_amd,
            unique_evaluated_compositions: r.unique_evaluated_compositions,
        });
    }
    Ok(rows)
}

/// One row of the full AF(k) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfPoint {
    pub system: String,
    pub policy: String,
    pub epsilon: f64,
    pub episode: usize,
    pub k: usize,
    pub t_policy: usize,
    pub t_baseline: usize,
    pub af: f64,
}

pub fn af_series(logs: &[LabeledLog], baseline: &str) -> Vec<AfPoint> {
    let mut out = Vec::new();
    for l in logs.iter().filter(|l| l.log.is_complete()) {
        let Some(b) = logs
            .iter()
            .find(|b| b.policy == baseline && b.key() == l.key() && b.log.is_complete())
        else {
            continue;
        };
        let pc = DiscoveryCurve::new(&l.log.curve()).expect("logged curves are valid");
        let bc = DiscoveryCurve::new(&b.log.curve()).expect("logged curves are valid");
        for k in 1..=pc.total() {
            let t_policy = pc.time_to(k).expect("k within total");
            let t_baseline = bc.time_to(k).unwrap_or(bc.budget());
            out.push(AfPoint {
                system: l.log.header.config.system.label(),
                policy: l.policy.clone(),
                epsilon: l.log.header.config.epsilon,
                episode: l.episode,
                k,
                t_policy,
                t_baseline,
                af: t_baseline as f64 / t_policy as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// sample standard deviation over sqrt(n); 0 for n = 1
    pub sem: f64,
    pub n: usize,
}

/// Mean and standard error; `None` for an empty sample.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = if n == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Some(Summary { mean, sem, n })
}

pub const AGGREGATED: [&str; 11] = [
    "discoveries",
    "msun",
    "audc",
    "af",
    "ef",
    "final_hull_discoveries",
    "mean_comp_l1",
    "unique_reduced_compositions",
    "unique_structures_amd",
    "mean_pairwise_amd",
    "unique_evaluated_compositions",
];

impl EpisodeMetrics {
    pub fn value(&self, metric: &str) -> Option<f64> {
        match metric {
            "discoveries" => Some(self.discoveries as f64),
            "msun" => Some(self.msun),
            "audc" => Some(self.audc),
            "af" => self.af,
            "ef" => self.ef,
            "final_hull_discoveries" => Some(self.final_hull_discoveries as f64),
            "mean_comp_l1" => Some(self.mean_comp_l1),
            "unique_reduced_compositions" => Some(self.unique_reduced_compositions as f64),
            "unique_structures_amd" => Some(self.unique_structures_amd as f64),
            "mean_pairwise_amd" => Some(self.mean_pairwise_amd),
            "unique_evaluated_compositions" => Some(self.unique_evaluated_compositions as f64),
            _ => None,
        }
    }
}

/// Summary of one (system size, policy, epsilon) group over complete episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub size: usize,
    pub policy: String,
    pub epsilon: f64,
    pub episodes: usize,
    pub incomplete: usize,
    /// per entry of [`AGGREGATED`]: summary over defined values and the excluded count
    pub metrics: Vec<(Option<Summary>, usize)>,
}

fn groups<'a, T>(items: &'a [T], key: impl Fn(&T) -> (usize, String, u64)) -> Vec<((usize, String, u64), Vec<&'a T>)> {
    let mut out: Vec<((usize, String, u64), Vec<&T>)> = Vec::new();
    for item in items {
        let k = key(item);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(item),
            None => out.push((k, vec![item])),
        }
    }
    out
}

/// Groups rows by (size, policy, epsilon) in first-appearance order.
pub fn aggregate(rows: &[EpisodeMetrics]) -> Vec<AggregateRow> {
    groups(rows, |r| (r.size, r.policy.clone(), r.epsilon.to_bits()))
        .into_iter()
        .map(|((size, policy, eps), members)| {
            let complete: Vec<&EpisodeMetrics> = members.iter().copied().filter(|r| r.complete).collect();
            let metrics = AGGREGATED
                .iter()
                .map(|m| {
                    let values: Vec<f64> = complete.iter().filter_map(|r| r.value(m)).collect();
                    (summarize(&values), complete.len() - values.len())
                })
                .collect();
            AggregateRow {
                size,
                policy,
                epsilon: f64::from_bits(eps),
                episodes: complete.len(),
                incomplete: members.len() - complete.len(),
                metrics,
            }
        })
        .collect()
}

/// Mean discovery curve of one (size, policy, epsilon) group.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub size: usize,
    pub policy: String,
    pub epsilon: f64,
    /// per t = 0..=B
    pub points: Vec<Summary>,
}

/// Mean ± SEM of D(t) over complete episodes, grouped like [`aggregate`]. Groups whose
/// episodes have different budgets are truncated to the shortest.
pub fn curve_summaries(logs: &[LabeledLog]) -> Vec<CurveSummary> {
    let complete: Vec<&LabeledLog> = logs.iter().filter(|l| l.log.is_complete()).collect();
    groups(&complete, |l| {
        let cfg = &l.log.header.config;
        (cfg.system.dim(), l.policy.clone(), cfg.epsilon.to_bits())
    })
    .into_iter()
    .map(|((size, policy, eps), members)| {
        let curves: Vec<Vec<usize>> = members
            .iter()
            .map(|l| std::iter::once(0).chain(l.log.curve()).collect())
            .collect();
        let len = curves.iter().map(Vec::len).min().unwrap_or(0);
        let points = (0..len)
            .map(|t| {
                let v: Vec<f64> = curves.iter().map(|c| c[t] as f64).collect();
                summarize(&v).expect("group is nonempty")
            })
            .collect();
        CurveSummary {
            size,
            policy,
            epsilon: f64::from_bits(eps),
            points,
        }
    })
    .collect()
}

pub fn write_episode_metrics<W: Write>(w: W, rows: &[EpisodeMetrics]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_episode_metrics<R: std::io::Read>(r: R) -> csv::Result<Vec<EpisodeMetrics>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_af_series<W: Write>(w: W, rows: &[AfPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_aggregate<W: Write>(w: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["size", "policy", "epsilon", "episodes", "incomplete"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in AGGREGATED {
        header.extend([format!("{m}_mean"), format!("{m}_sem"), format!("{m}_n"), format!("{m}_excluded")]);
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.size.to_string(),
            r.policy.clone(),
            r.epsilon.to_string(),
            r.episodes.to_string(),
            r.incomplete.to_string(),
        ];
        for (s, excluded) in &r.metrics {
            rec.extend([
                opt(s.map(|s| s.mean)),
                opt(s.map(|s| s.sem)),
                s.map_or(0, |s| s.n).to_string(),
                excluded.to_string(),
            ]);
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curves<W: Write>(w: W, curves: &[CurveSummary]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["size", "policy", "epsilon", "t", "d_mean", "d_sem", "n"])?;
    for c in curves {
        for (t, p) in c.points.iter().enumerate() {
            out.write_record([
                c.size.to_string(),
                c.policy.clone(),
                c.epsilon.to_string(),
                t.to_string(),
                p.mean.to_string(),
                p.sem.to_string(),
                p.n.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

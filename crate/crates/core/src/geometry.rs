//! Periodic neighbor analysis: average-minimum-distance fingerprints, structure
//! matching and the minimum interatomic distance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chem::{ChemError, Structure};

/// Average minimum distances: entry `j` is the mean over atoms of the distance to the
/// (j+1)-th nearest periodic neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmdVector(Vec<f64>);

impl AmdVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// L-infinity distance over the common prefix.
    pub fn linf(&self, other: &AmdVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// How two structures are judged to be the same.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchPolicy {
    pub amd_k: usize,
    /// Å
    pub amd_tol: f64,
    pub require_same_reduced_formula: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            amd_k: 100,
            amd_tol: 0.05,
            require_same_reduced_formula: true,
        }
    }
}

impl MatchPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.amd_k == 0 {
            return Err("amd_k must be at least 1".into());
        }
        if !(self.amd_tol > 0.0) {
            return Err("amd_tol must be positive".into());
        }
        Ok(())
    }
}

/// Sorted distances from site `i` to its `k` nearest periodic neighbors (self images
/// included, the site itself excluded).
pub fn nearest_neighbor_distances(s: &Structure, i: usize, k: usize) -> Vec<f64> {
    let lattice = s.lattice();
    let n = s.num_atoms();
    let density = n as f64 / lattice.volume();
    let mut radius = (3.0 * k as f64 / (4.0 * PI * density)).cbrt() * 1.2;
    let frac = s.frac_coords();
    let mut dists = Vec::with_capacity(2 * k);
    loop {
        dists.clear();
        for (j, fj) in frac.iter().enumerate() {
            lattice.for_each_image(&(fj - frac[i]), radius, |shift, _, d| {
                if !(j == i && shift == [0, 0, 0]) {
                    dists.push(d);
                }
            });
        }
        // every neighbor closer than `radius` has been seen, so the k smallest are exact
        if dists.len() >= k {
            dists.sort_by(f64::total_cmp);
            dists.truncate(k);
            return dists;
        }
        radius *= 1.5;
    }
}

pub fn amd(s: &Structure, k: usize) -> Result<AmdVector, ChemError> {
    if k == 0 {
        return Err(ChemError::InvalidSystem("amd requires k >= 1".into()));
    }
    if !(s.lattice().volume() > 0.0) {
        return Err(ChemError::DegenerateLattice("non-positive volume".into()));
    }
    let n = s.num_atoms();
    let mut sums = vec![0.0; k];
    for i in 0..n {
        for (acc, d) in sums.iter_mut().zip(nearest_neighbor_distances(s, i, k)) {
            *acc += d;
        }
    }
    Ok(AmdVector(sums.into_iter().map(|x| x / n as f64).collect()))
}

/// Symmetric, reflexive structural equivalence under `policy`.
pub fn structures_match(a: &Structure, b: &Structure, policy: &MatchPolicy) -> Result<bool, ChemError> {
    if policy.require_same_reduced_formula && a.composition().reduce() != b.composition().reduce() {
        return Ok(false);
    }
    Ok(amd(a, policy.amd_k)?.linf(&amd(b, policy.amd_k)?) <= policy.amd_tol)
}

/// Smallest interatomic distance including each site against its own images.
pub fn min_pair_distance(s: &Structure) -> f64 {
    let n = s.num_atoms();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            let d = s.min_image_distance(i, j).expect("indices are in range");
            best = best.min(d);
        }
    }
    best
}

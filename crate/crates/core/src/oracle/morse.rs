//! Seeded Morse pair potential with a shifted-energy cutoff.

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{Element, Structure};
use crate::seed;

pub const WELL_DEPTH_RANGE: (f64, f64) = (0.2, 1.0);
pub const EQUILIBRIUM_RANGE: (f64, f64) = (2.2, 3.4);
pub const WIDTH_RANGE: (f64, f64) = (1.0, 2.0);

/// Morse parameters for one unordered element pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// eV
    pub well_depth: f64,
    /// Å
    pub equilibrium_distance: f64,
    /// 1/Å
    pub width: f64,
}

impl PairParams {
    /// Draws the parameters for `(a, b)` from the seed; symmetric in the pair.
    pub fn draw(seed: u64, a: Element, b: Element) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut rng = seed::rng(seed::derive(
            "morse-pair",
            &[seed, u64::from(lo.atomic_number()), u64::from(hi.atomic_number())],
        ));
        PairParams {
            well_depth: rng.gen_range(WELL_DEPTH_RANGE.0..WELL_DEPTH_RANGE.1),
            equilibrium_distance: rng.gen_range(EQUILIBRIUM_RANGE.0..EQUILIBRIUM_RANGE.1),
            width: rng.gen_range(WIDTH_RANGE.0..WIDTH_RANGE.1),
        }
    }

    /// Unshifted pair energy and its radial derivative dV/dr.
    #[inline]
    pub fn energy_derivative(&self, r: f64) -> (f64, f64) {
        let e = (-self.width * (r - self.equilibrium_distance)).exp();
        let v = self.well_depth * (e * e - 2.0 * e);
        let dv = 2.0 * self.width * self.well_depth * e * (1.0 - e);
        (v, dv)
    }
}

/// One interacting pair: site `j` translated by `shift` (Cartesian, Å) seen from site `i`.
#[derive(Debug, Clone, Copy)]
struct Pair {
    i: usize,
    j: usize,
    shift: Vector3<f64>,
    params: usize,
}

/// Pair list built with a skin so it stays valid while no atom has moved more than half
/// the skin.
#[derive(Debug, Clone)]
pub struct NeighborList {
    pairs: Vec<Pair>,
    reference: Vec<Vector3<f64>>,
    skin: f64,
}

/// The Morse potential restricted to the species of one structure.
#[derive(Debug, Clone)]
pub struct MorseModel {
    cutoff: f64,
    params: Vec<PairParams>,
    shifts: Vec<f64>,
    index: HashMap<(Element, Element), usize>,
}

impl MorseModel {
    pub fn for_species(seed: u64, cutoff: f64, species: &[Element]) -> Self {
        let mut kinds: Vec<Element> = species.to_vec();
        kinds.sort();
        kinds.dedup();
        let mut params = Vec::new();
        let mut index = HashMap::new();
        for (x, &a) in kinds.iter().enumerate() {
            for &b in &kinds[x..] {
                index.insert((a, b), params.len());
                index.insert((b, a), params.len());
                params.push(PairParams::draw(seed, a, b));
            }
        }
        let shifts = params.iter().map(|p| p.energy_derivative(cutoff).0).collect();
        MorseModel {
            cutoff,
            params,
            shifts,
            index,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn pair(&self, a: Element, b: Element) -> PairParams {
        self.params[self.index[&(a, b)]]
    }

    pub fn neighbor_list(&self, s: &Structure, positions: &[Vector3<f64>], skin: f64) -> NeighborList {
        let lattice = s.lattice();
        let species = s.species();
        let n = positions.len();
        let frac: Vec<_> = positions.iter().map(|x| lattice.to_fractional(x)).collect();
        let reach = self.cutoff + skin;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i..n {
                let params = self.index[&(species[i], species[j])];
                let df = frac[j] - frac[i];
                lattice.for_each_image(&df, reach, |shift, _, _| {
                    // each self pair is counted once, from the lexicographically positive image
                    if i == j && shift <= [0, 0, 0] {
                        return;
                    }
                    let shift = lattice.to_cartesian(&Vector3::new(shift[0] as f64, shift[1] as f64, shift[2] as f64));
                    pairs.push(Pair { i, j, shift, params });
                });
            }
        }
        NeighborList {
            pairs,
            reference: positions.to_vec(),
            skin,
        }
    }

    /// Total energy (eV) and forces (eV/Å) at Cartesian `positions` using a valid list.
    pub fn evaluate(&self, list: &NeighborList, positions: &[Vector3<f64>]) -> (f64, Vec<Vector3<f64>>) {
        let mut energy = 0.0;
        let mut forces = vec![Vector3::zeros(); positions.len()];
        let rc2 = self.cutoff * self.cutoff;
        for p in &list.pairs {
            let d = positions[p.j] + p.shift - positions[p.i];
            let r2 = d.norm_squared();
            if r2 >= rc2 {
                continue;
            }
            let r = r2.sqrt();
            let (v, dv) = self.params[p.params].energy_derivative(r);
            energy += v - self.shifts[p.params];
            if p.i != p.j && r > 1e-12 {
                let f = d * (dv / r);
                forces[p.i] += f;
                forces[p.j] -= f;
            }
        }
        (energy, forces)
    }

    pub fn energy_and_forces(&self, s: &Structure) -> (f64, Vec<Vector3<f64>>) {
        let positions = s.cartesian_coords();
        let list = self.neighbor_list(s, &positions, 0.0);
        self.evaluate(&list, &positions)
    }
}

impl NeighborList {
    pub fn is_valid_for(&self, positions: &[Vector3<f64>]) -> bool {
        let limit = 0.5 * self.skin;
        self.reference
            .iter()
            .zip(positions)
            .all(|(a, b)| (a - b).norm_squared() < limit * limit)
    }
}

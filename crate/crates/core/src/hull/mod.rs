//! Thermodynamic stability on the composition simplex.
//!
//! The lower hull is never built explicitly. The hull energy at a composition `x` is the
//! optimum of a small linear program over convex combinations of known entries that
//! reproduce `x`; energy above hull follows by subtraction.

pub mod lp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{ChemError, ChemicalSystem, Element, Structure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("no entry left at the simplex vertex of {0}")]
    MissingVertex(Element),
    #[error("point is not on the composition simplex of dimension {0}")]
    NotOnSimplex(usize),
    #[error("hull linear program failed: {0:?}")]
    Lp(lp::LpError),
    #[error("unknown entry id {0}")]
    UnknownEntry(usize),
    #[error("non-finite energy {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Proposed { query: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullEntry {
    pub entry_id: usize,
    pub structure: Structure,
    pub composition_vector: Vec<f64>,
    /// formation energy, eV/atom
    pub energy_per_atom: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// eV/atom, never negative
    pub e_above_hull: f64,
    pub is_stable: bool,
    /// (entry_id, weight) pairs of the hull phases at this composition
    pub decomposition: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    /// eV/atom
    pub energy: f64,
    pub decomposition: Vec<(usize, f64)>,
}

/// Result of inserting an entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AddOutcome {
    pub entry_id: usize,
    pub stability: StabilityResult,
    /// ids of previously present entries whose stable flag flipped
    pub changed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct HullState {
    system: ChemicalSystem,
    epsilon: f64,
    entries: Vec<HullEntry>,
    stability: Vec<StabilityResult>,
}

impl HullState {
    /// Seeds the hull with one zero-energy entry per element, using `vertex` to supply
    /// each elemental structure.
    pub fn new(
        system: ChemicalSystem,
        epsilon: f64,
        mut vertex: impl FnMut(Element) -> Structure,
    ) -> Result<Self, HullError> {
        if !(epsilon >= 0.0) {
            return Err(HullError::NonFinite(epsilon));
        }
        let mut h = HullState {
            system: system.clone(),
            epsilon,
            entries: Vec::new(),
            stability: Vec::new(),
        };
        for &el in system.elements() {
            let structure = vertex(el);
            let composition_vector = structure.composition().vector(&system)?;
            h.entries.push(HullEntry {
                entry_id: h.entries.len(),
                structure,
                composition_vector,
                energy_per_atom: 0.0,
                origin: Origin::Initial,
            });
        }
        h.refresh()?;
        Ok(h)
    }

    pub fn system(&self) -> &ChemicalSystem {
        &self.system
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn entries(&self) -> &[HullEntry] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> Result<&HullEntry, HullError> {
        self.entries.get(id).ok_or(HullError::UnknownEntry(id))
    }

    pub fn stability(&self, id: usize) -> Result<&StabilityResult, HullError> {
        self.stability.get(id).ok_or(HullError::UnknownEntry(id))
    }

    pub fn stable_ids(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.stability[i].is_stable).collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<(), HullError> {
        let d = self.system.dim();
        if x.len() != d || x.iter().any(|v| !(*v >= -1e-12)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(HullError::NotOnSimplex(d));
        }
        Ok(())
    }

    /// Lowest energy attainable at composition `x` by mixing entries (optionally
    /// ignoring one), with the achieving weights.
    pub fn hull_energy_at(&self, x: &[f64], exclude: Option<usize>) -> Result<HullPoint, HullError> {
        self.check_point(x)?;
        let d = self.system.dim();
        let active: Vec<&HullEntry> = self.entries.iter().filter(|e| Some(e.entry_id) != exclude).collect();

        let mut basis = Vec::with_capacity(d);
        for (i, &el) in self.system.elements().iter().enumerate() {
            let vertex = active
                .iter()
                .enumerate()
                .filter(|(_, e)| e.composition_vector[i] == 1.0)
                .min_by(|(_, a), (_, b)| a.energy_per_atom.total_cmp(&b.energy_per_atom))
                .map(|(k, _)| k)
                .ok_or(HullError::MissingVertex(el))?;
            basis.push(vertex);
        }

        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| active.iter().map(|e| e.composition_vector[i]).collect())
            .collect();
        let c: Vec<f64> = active.iter().map(|e| e.energy_per_atom).collect();
        let b: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let sol = lp::solve_from_identity_basis(&rows, &b, &c, basis).map_err(HullError::Lp)?;

        let decomposition = sol
            .x
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| (active[k].entry_id, *w))
            .collect();
        Ok(HullPoint {
            energy: sol.objective,
            decomposition,
        })
    }

    fn compute_stability(&self, id: usize) -> Result<StabilityResult, HullError> {
        let e = self.entry(id)?;
        let hull = self.hull_energy_at(&e.composition_vector, None)?;
        let e_above_hull = (e.energy_per_atom - hull.energy).max(0.0);
        Ok(StabilityResult {
            e_above_hull,
            is_stable: e_above_hull <= self.epsilon,
            decomposition: hull.decomposition,
        })
    }

    /// Stability of a present entry against the hull that includes it.
    pub fn energy_above_hull(&self, id: usize) -> Result<StabilityResult, HullError> {
        self.stability(id).cloned()
    }

    /// Signed distance of a not-yet-added candidate from the current hull; negative
    /// when the candidate would lower the hull.
    pub fn screen_candidate(&self, x: &[f64], predicted_energy: f64) -> Result<f64, HullError> {
        Ok(predicted_energy - self.hull_energy_at(x, None)?.energy)
    }

    fn refresh(&mut self) -> Result<(), HullError> {
        self.stability = (0..self.entries.len())
            .map(|i| self.compute_stability(i))
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    /// Inserts a structure with its formation energy and recomputes every entry's
    /// stability.
    pub fn add_entry(&mut self, structure: Structure, energy_per_atom: f64, origin: Origin) -> Result<AddOutcome, HullError> {
        if !energy_per_atom.is_finite() {
            return Err(HullError::NonFinite(energy_per_atom));
        }
        let composition_vector = structure.composition().vector(&self.system)?;
        let entry_id = self.entries.len();
        let before: Vec<bool> = self.stability.iter().map(|s| s.is_stable).collect();
        self.entries.push(HullEntry {
            entry_id,
            structure,
            composition_vector,
            energy_per_atom,
            origin,
        });
        if let Err(e) = self.refresh() {
            self.entries.pop();
            self.refresh()?;
            return Err(e);
        }
        let changed = before
            .iter()
            .enumerate()
            .filter(|(i, &was)| self.stability[*i].is_stable != was)
            .map(|(i, _)| i)
            .collect();
        Ok(AddOutcome {
            entry_id,
            stability: self.stability[entry_id].clone(),
            changed,
        })
    }

    /// Entries, their stability, and hull energies on a simplex grid with `resolution`
    /// divisions per edge.
    pub fn export(&self, resolution: u32) -> Result<PhaseDiagram, HullError> {
        let entries = self
            .entries
            .iter()
            .zip(&self.stability)
            .map(|(e, s)| PhaseDiagramEntry {
                entry_id: e.entry_id,
                formula: e.structure.composition().reduced_formula(),
                composition: e.composition_vector.clone(),
                energy_per_atom: e.energy_per_atom,
                e_above_hull: s.e_above_hull,
                stable: s.is_stable,
                origin: e.origin,
            })
            .collect();
        let mut samples = Vec::new();
        let d = self.system.dim();
        let mut counts = vec![0u32; d];
        let mut points = Vec::new();
        grid(&mut counts, 0, resolution.max(1), &mut points);
        for p in points {
            let x: Vec<f64> = p.iter().map(|&n| f64::from(n) / f64::from(resolution.max(1))).collect();
            let energy = self.hull_energy_at(&x, None)?.energy;
            samples.push(HullSample { composition: x, hull_energy: energy });
        }
        Ok(PhaseDiagram {
            elements: self.system.elements().iter().map(|e| e.symbol().to_string()).collect(),
            epsilon: self.epsilon,
            entries,
            samples,
        })
    }
}

fn grid(counts: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        out.push(counts.clone());
        return;
    }
    for n in 0..=remaining {
        counts[pos] = n;
        grid(counts, pos + 1, remaining - n, out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramEntry {
    pub entry_id: usize,
    pub formula: String,
    pub composition: Vec<f64>,
    pub energy_per_atom: f64,
    pub e_above_hull: f64,
    pub stable: bool,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSample {
    pub composition: Vec<f64>,
    pub hull_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub elements: Vec<String>,
    pub epsilon: f64,
    pub entries: Vec<PhaseDiagramEntry>,
    pub samples: Vec<HullSample>,
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;
    use crate::chem::Lattice;

    fn system() -> ChemicalSystem {
        ChemicalSystem::from_symbols(&["Fe", "Al"], 8).unwrap()
    }

    fn structure(fe: usize, al: usize) -> Structure {
        let fe_el = Element::from_symbol("Fe").unwrap();
        let al_el = Element::from_symbol("Al").unwrap();
        let mut species = vec![fe_el; fe];
        species.extend(vec![al_el; al]);
        let n = species.len();
        let coords = (0..n).map(|i| Vector3::new(i as f64 / n as f64, 0.0, 0.0)).collect();
        Structure::new(Lattice::cubic(4.0).unwrap(), species, coords).unwrap()
    }

    fn vertex(el: Element) -> Structure {
        Structure::fcc(el, 3.6).unwrap()
    }

    fn worked_example() -> HullState {
        let mut h = HullState::new(system(), 0.1, vertex).unwrap();
        h.add_entry(structure(1, 1), -0.5, Origin::Initial).unwrap();
        h.add_entry(structure(3, 1), -0.1, Origin::Initial).unwrap();
        h
    }

    #[test]
    fn elements_only_hull_is_flat() {
        let h = HullState::new(system(), 0.1, vertex).unwrap();
        for x in [[1.0, 0.0], [0.3, 0.7], [0.5, 0.5]] {
            assert_eq!(h.hull_energy_at(&x, None).unwrap().energy, 0.0);
        }
        assert_eq!(h.screen_candidate(&[0.4, 0.6], -0.2).unwrap(), -0.2);
        assert_eq!(h.stable_ids(), vec![0, 1]);
    }

    #[test]
    fn worked_binary_example() {
        let h = worked_example();
        let p = h.hull_energy_at(&[0.75, 0.25], None).unwrap();
        assert!((p.energy + 0.25).abs() < 1e-12);
        assert_eq!(p.decomposition.len(), 2);
        for (id, w) in &p.decomposition {
            assert!([0, 2].contains(id));
            assert!((w - 0.5).abs() < 1e-12);
        }
        let a3b = h.energy_above_hull(3).unwrap();
        assert!((a3b.e_above_hull - 0.15).abs() < 1e-12);
        assert!(!a3b.is_stable);
        let ab = h.energy_above_hull(2).unwrap();
        assert_eq!(ab.e_above_hull, 0.0);
        assert_eq!(h.stable_ids(), vec![0, 1, 2]);
        // exactly at the hull
        assert!(h.screen_candidate(&[0.5, 0.5], -0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn polymorphs_and_duplicates() {
        let mut h = HullState::new(system(), 0.05, vertex).unwrap();
        let first = h.add_entry(structure(1, 1), -0.5, Origin::Proposed { query: 1 }).unwrap();
        assert!(first.stability.is_stable);
        assert!(first.changed.is_empty());
        assert_eq!(h.stable_ids(), vec![0, 1, 2]);

        let second = h.add_entry(structure(1, 1), -0.6, Origin::Proposed { query: 2 }).unwrap();
        assert!(second.stability.is_stable);
        assert_eq!(second.changed, vec![2]);
        assert!((h.energy_above_hull(2).unwrap().e_above_hull - 0.1).abs() < 1e-12);

        let before: Vec<f64> = (0..4).map(|i| h.energy_above_hull(i).unwrap().e_above_hull).collect();
        let dup = h.add_entry(structure(1, 1), -0.6, Origin::Proposed { query: 3 }).unwrap();
        assert_eq!(dup.stability.e_above_hull, 0.0);
        let after: Vec<f64> = (0..4).map(|i| h.energy_above_hull(i).unwrap().e_above_hull).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn exclusion_and_errors() {
        let h = worked_example();
        let without_ab = h.hull_energy_at(&[0.5, 0.5], Some(2)).unwrap();
        // only A3B (-0.1 at 0.75) and the vertices remain
        assert!((without_ab.energy + 0.1 * 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(h.hull_energy_at(&[0.5, 0.5], Some(0)), Err(HullError::MissingVertex(_))));
        assert!(matches!(h.hull_energy_at(&[0.5, 0.6], None), Err(HullError::NotOnSimplex(2))));
    }

    #[test]
    fn export_samples_grid() {
        let h = worked_example();
        let pd = h.export(4).unwrap();
        assert_eq!(pd.entries.len(), 4);
        assert_eq!(pd.samples.len(), 5);
        let mid = pd.samples.iter().find(|s| s.composition == vec![0.5, 0.5]).unwrap();
        assert!((mid.hull_energy + 0.5).abs() < 1e-12);
    }
}

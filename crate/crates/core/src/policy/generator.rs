//! Unbiased random crystal generator.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CandidateBatch;
use crate::chem::{ChemicalSystem, Composition, Lattice, Structure};

pub const LENGTH_RANGE: (f64, f64) = (3.0, 15.0);
pub const ANGLE_RANGE: (f64, f64) = (60.0, 120.0);
pub const GENERATOR_NAME: &str = "random";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub batch_size: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { batch_size: 32 }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("generator batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Lattice with i.i.d. uniform lengths and angles; metrically invalid draws are redrawn.
pub fn random_lattice<R: Rng + ?Sized>(rng: &mut R) -> Lattice {
    loop {
        let l: [f64; 3] = std::array::from_fn(|_| rng.gen_range(LENGTH_RANGE.0..LENGTH_RANGE.1));
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(ANGLE_RANGE.0..ANGLE_RANGE.1));
        if let Ok(lat) = Lattice::from_parameters(l[0], l[1], l[2], a[0], a[1], a[2]) {
            return lat;
        }
    }
}

/// One random structure of the full formula `c`, species in `system` order.
pub fn random_structure<R: Rng + ?Sized>(c: &Composition, system: &ChemicalSystem, rng: &mut R) -> Structure {
    let lattice = random_lattice(rng);
    let species = c.species_in_order(system.elements());
    let coords = (0..species.len())
        .map(|_| Vector3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    Structure::new(lattice, species, coords).expect("finite coordinates and a valid lattice")
}

pub fn generate_random<R: Rng + ?Sized>(
    c: &Composition,
    n: usize,
    system: &ChemicalSystem,
    rng: &mut R,
) -> CandidateBatch {
    CandidateBatch {
        composition: c.clone(),
        structures: (0..n).map(|_| random_structure(c, system, rng)).collect(),
        provenance: GENERATOR_NAME.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::Element;

    #[test]
    fn draws_respect_ranges_and_formula() {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al"], 3).unwrap();
        let fe = Element::from_symbol("Fe").unwrap();
        let c = Composition::from_pairs(&[(fe, 2), (Element::from_symbol("Al").unwrap(), 1)]).unwrap();
        let batch = generate_random(&c, 200, &sys, &mut crate::seed::rng(5));
        assert_eq!(batch.structures.len(), 200);
        for s in &batch.structures {
            assert_eq!(s.composition(), c);
            for l in s.lattice().lengths() {
                assert!((3.0..=15.0).contains(&l));
            }
            for a in s.lattice().angles() {
                assert!((60.0 - 1e-9..=120.0 + 1e-9).contains(&a), "{a}");
            }
            for f in s.frac_coords() {
                assert!(f.iter().all(|v| (0.0..1.0).contains(v)));
            }
        }
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al"], 4).unwrap();
        let c = sys.enumerate_compositions()[3].clone();
        let a = generate_random(&c, 8, &sys, &mut crate::seed::rng(1));
        let b = generate_random(&c, 8, &sys, &mut crate::seed::rng(1));
        let ja: Vec<String> = a.structures.iter().map(|s| s.to_json()).collect();
        let jb: Vec<String> = b.structures.iter().map(|s| s.to_json()).collect();
        assert_eq!(ja, jb);
    }
}

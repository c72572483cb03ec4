use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{ChemError, Composition, Element, Lattice};

/// Wraps a fractional coordinate into [0, 1).
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// A periodic crystal: lattice, per-site species and fractional coordinates in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    lattice: Lattice,
    species: Vec<Element>,
    frac_coords: Vec<Vector3<f64>>,
}

/// On-disk form of a [`Structure`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureRecord {
    pub lattice: [[f64; 3]; 3],
    pub species: Vec<String>,
    pub frac_coords: Vec<[f64; 3]>,
}

impl Structure {
    pub fn new(lattice: Lattice, species: Vec<Element>, frac_coords: Vec<Vector3<f64>>) -> Result<Self, ChemError> {
        if species.is_empty() {
            return Err(ChemError::EmptyStructure);
        }
        if species.len() != frac_coords.len() {
            return Err(ChemError::SiteMismatch {
                species: species.len(),
                coords: frac_coords.len(),
            });
        }
        if frac_coords.iter().any(|f| f.iter().any(|x| !x.is_finite())) {
            return Err(ChemError::NonFiniteCoordinate);
        }
        let frac_coords = frac_coords.into_iter().map(|f| f.map(wrap_unit)).collect();
        Ok(Structure {
            lattice,
            species,
            frac_coords,
        })
    }

    pub fn from_cartesian(lattice: Lattice, species: Vec<Element>, cart: &[Vector3<f64>]) -> Result<Self, ChemError> {
        let frac = cart.iter().map(|c| lattice.to_fractional(c)).collect();
        Structure::new(lattice, species, frac)
    }

    /// Face-centred cubic conventional cell (4 atoms) with cubic lattice constant `a`.
    pub fn fcc(element: Element, a: f64) -> Result<Self, ChemError> {
        let frac = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.0, 0.5, 0.5),
            Vector3::new(0.5, 0.0, 0.5),
            Vector3::new(0.5, 0.5, 0.0),
        ];
        Structure::new(Lattice::cubic(a)?, vec![element; 4], frac)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn species(&self) -> &[Element] {
        &self.species
    }

    pub fn frac_coords(&self) -> &[Vector3<f64>] {
        &self.frac_coords
    }

    pub fn num_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn cartesian_coords(&self) -> Vec<Vector3<f64>> {
        self.frac_coords.iter().map(|f| self.lattice.to_cartesian(f)).collect()
    }

    pub fn composition(&self) -> Composition {
        Composition::from_species(&self.species).expect("structure has at least one site")
    }

    /// Same lattice and species with new fractional coordinates.
    pub fn with_frac_coords(&self, frac_coords: Vec<Vector3<f64>>) -> Result<Self, ChemError> {
        Structure::new(self.lattice.clone(), self.species.clone(), frac_coords)
    }

    /// Minimum distance between site `i` and any periodic image of site `j`. For `i == j`
    /// the zero translation is excluded, giving the distance to the nearest self-image.
    pub fn min_image_distance(&self, i: usize, j: usize) -> Result<f64, ChemError> {
        let n = self.num_atoms();
        if i >= n || j >= n {
            return Err(ChemError::IndexOutOfRange { index: i.max(j), len: n });
        }
        let df = self.frac_coords[j] - self.frac_coords[i];
        // upper bound from the nearest-integer wrap (or the shortest cell vector for a
        // self pair), then an exact scan of every image inside that bound
        let bound = if i == j {
            self.lattice.lengths().into_iter().fold(f64::INFINITY, f64::min)
        } else {
            self.lattice.to_cartesian(&df.map(|x| x - x.round())).norm()
        };
        let mut best = f64::INFINITY;
        self.lattice.for_each_image(&df, bound * (1.0 + 1e-12) + 1e-12, |n, _, d| {
            if i == j && n == [0, 0, 0] {
                return;
            }
            best = best.min(d);
        });
        Ok(best)
    }

    /// Replicates the cell `reps[k]` times along lattice vector `k`.
    pub fn supercell(&self, reps: [u32; 3]) -> Result<Structure, ChemError> {
        let lattice = self.lattice.supercell(reps)?;
        let mut species = Vec::new();
        let mut coords = Vec::new();
        for a in 0..reps[0] {
            for b in 0..reps[1] {
                for c in 0..reps[2] {
                    let shift = Vector3::new(f64::from(a), f64::from(b), f64::from(c));
                    for (el, f) in self.species.iter().zip(&self.frac_coords) {
                        species.push(*el);
                        coords.push((f + shift).component_div(&Vector3::new(
                            f64::from(reps[0]),
                            f64::from(reps[1]),
                            f64::from(reps[2]),
                        )));
                    }
                }
            }
        }
        Structure::new(lattice, species, coords)
    }

    pub fn to_record(&self) -> StructureRecord {
        StructureRecord {
            lattice: self.lattice.rows(),
            species: self.species.iter().map(|e| e.symbol().to_string()).collect(),
            frac_coords: self.frac_coords.iter().map(|f| [f[0], f[1], f[2]]).collect(),
        }
    }

    pub fn from_record(record: &StructureRecord) -> Result<Self, ChemError> {
        let lattice = Lattice::from_rows(record.lattice)?;
        let species = record
            .species
            .iter()
            .map(|s| Element::from_symbol(s))
            .collect::<Result<Vec<_>, _>>()?;
        let coords = record.frac_coords.iter().map(|f| Vector3::new(f[0], f[1], f[2])).collect();
        Structure::new(lattice, species, coords)
    }

    /// Canonical JSON bytes of the structure.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("structure records always serialize")
    }

    /// 64-bit digest of the canonical JSON form; stable across runs and platforms.
    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_json().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }
}

impl Serialize for Structure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Structure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = StructureRecord::deserialize(deserializer)?;
        Structure::from_record(&record).map_err(serde::de::Error::custom)
    }
}

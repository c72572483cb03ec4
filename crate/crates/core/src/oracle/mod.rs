//! Energy oracles: the deterministic synthetic Morse oracle with FIRE relaxation, its
//! noisy surrogate, and the external plugin client.

pub mod external;
pub mod fire;
pub mod morse;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::Vector3;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{ChemError, Element, Structure};
use crate::plugin::PluginError;
use crate::seed;

pub use external::ExternalOracle;
pub use fire::{relax, RelaxSpec, Relaxation};
pub use morse::{MorseModel, PairParams};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle returned a non-finite energy ({0})")]
    NonFinite(f64),
    #[error(transparent)]
    Plugin(#[from] PluginError),
    #[error("invalid structure: {0}")]
    Chem(#[from] ChemError),
    #[error("invalid oracle spec: {0}")]
    Spec(String),
}

/// Outcome of one oracle query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// formation energy, eV/atom
    pub energy_per_atom: f64,
    pub relaxed: Structure,
    pub steps_used: usize,
    pub converged: bool,
}

/// Anything that maps a structure to a formation energy per atom.
pub trait Oracle: Send {
    fn evaluate(&mut self, s: &Structure) -> Result<OracleResult, OracleError>;

    /// Structure used for the zero-energy simplex vertex of `element`.
    fn elemental_reference(&self, element: Element) -> Structure {
        Structure::fcc(element, 4.0).expect("positive lattice constant")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticOracleSpec {
    pub seed: u64,
    /// pair cutoff, Å
    pub cutoff: f64,
    pub relax: RelaxSpec,
}

impl Default for SyntheticOracleSpec {
    fn default() -> Self {
        SyntheticOracleSpec {
            seed: 0,
            cutoff: 8.0,
            relax: RelaxSpec::default(),
        }
    }
}

impl SyntheticOracleSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        let min_cutoff = 2.0 * morse::EQUILIBRIUM_RANGE.1;
        if !(self.cutoff >= min_cutoff) {
            return Err(OracleError::Spec(format!(
                "cutoff {} is below twice the largest equilibrium distance ({min_cutoff})",
                self.cutoff
            )));
        }
        self.relax.validate().map_err(OracleError::Spec)
    }

    pub fn pair_params(&self, a: Element, b: Element) -> PairParams {
        PairParams::draw(self.seed, a, b)
    }

    pub fn model(&self, s: &Structure) -> MorseModel {
        MorseModel::for_species(self.seed, self.cutoff, s.species())
    }
}

/// Total energy (eV) and per-atom forces (eV/Å) of `s` under the synthetic potential.
pub fn pair_energy_and_forces(s: &Structure, spec: &SyntheticOracleSpec) -> (f64, Vec<Vector3<f64>>) {
    spec.model(s).energy_and_forces(s)
}

/// Positions-only FIRE relaxation under the synthetic potential.
pub fn relax_structure(s: &Structure, spec: &SyntheticOracleSpec) -> Relaxation {
    relax(&spec.model(s), s, &spec.relax)
}

/// The synthetic oracle. Elemental reference energies are computed lazily and shared
/// between clones.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    spec: SyntheticOracleSpec,
    references: Arc<Mutex<HashMap<Element, f64>>>,
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticOracleSpec) -> Result<Self, OracleError> {
        spec.validate()?;
        Ok(SyntheticOracle {
            spec,
            references: Arc::default(),
        })
    }

    pub fn spec(&self) -> &SyntheticOracleSpec {
        &self.spec
    }

    /// Canonical FCC cell whose nearest-neighbor distance is the like-pair equilibrium
    /// distance.
    pub fn reference_structure(&self, element: Element) -> Structure {
        let r_eq = self.spec.pair_params(element, element).equilibrium_distance;
        Structure::fcc(element, r_eq * std::f64::consts::SQRT_2).expect("positive lattice constant")
    }

    /// Per-atom energy of the relaxed elemental reference, eV/atom.
    pub fn reference_energy(&self, element: Element) -> f64 {
        if let Some(e) = self.references.lock().expect("reference cache poisoned").get(&element) {
            return *e;
        }
        let s = self.reference_structure(element);
        let relaxed = relax_structure(&s, &self.spec);
        let e = pair_energy_and_forces(&relaxed.structure, &self.spec).0 / s.num_atoms() as f64;
        self.references
            .lock()
            .expect("reference cache poisoned")
            .insert(element, e);
        e
    }

    /// Relaxes `s` and returns its formation energy per atom relative to the elemental
    /// references.
    pub fn formation_energy(&self, s: &Structure) -> Result<OracleResult, OracleError> {
        let relaxation = relax_structure(s, &self.spec);
        let relaxed = relaxation.structure;
        let n = relaxed.num_atoms() as f64;
        let total = pair_energy_and_forces(&relaxed, &self.spec).0;
        let reference: f64 = relaxed.species().iter().map(|el| self.reference_energy(*el)).sum::<f64>() / n;
        let energy_per_atom = total / n - reference;
        if !energy_per_atom.is_finite() {
            return Err(OracleError::NonFinite(energy_per_atom));
        }
        Ok(OracleResult {
            energy_per_atom,
            relaxed,
            steps_used: relaxation.steps_used,
            converged: relaxation.converged,
        })
    }
}

impl Oracle for SyntheticOracle {
    fn evaluate(&mut self, s: &Structure) -> Result<OracleResult, OracleError> {
        self.formation_energy(s)
    }

    fn elemental_reference(&self, element: Element) -> Structure {
        self.reference_structure(element)
    }
}

/// Lower-fidelity estimator: the synthetic oracle plus hash-keyed Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub base: SyntheticOracleSpec,
    /// eV/atom
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    oracle: SyntheticOracle,
    noise_sigma: f64,
    noise_seed: u64,
}

impl Surrogate {
    pub fn new(spec: &SurrogateSpec) -> Result<Self, OracleError> {
        if !(spec.noise_sigma >= 0.0) {
            return Err(OracleError::Spec("noise_sigma must be non-negative".into()));
        }
        Ok(Surrogate {
            oracle: SyntheticOracle::new(spec.base.clone())?,
            noise_sigma: spec.noise_sigma,
            noise_seed: spec.noise_seed,
        })
    }

    /// Noise term for `s`; a pure function of the noise seed and the structure content.
    pub fn noise(&self, s: &Structure) -> f64 {
        if self.noise_sigma == 0.0 {
            return 0.0;
        }
        let mut rng = seed::rng(seed::derive("surrogate-noise", &[self.noise_seed, s.content_hash()]));
        let z: f64 = StandardNormal.sample(&mut rng);
        self.noise_sigma * z
    }

    pub fn energy(&self, s: &Structure) -> Result<f64, OracleError> {
        let base = self.oracle.formation_energy(s)?.energy_per_atom;
        Ok(base + self.noise(s))
    }
}

/// Formation energy under `spec` (convenience wrapper).
pub fn formation_energy(s: &Structure, spec: &SyntheticOracleSpec) -> Result<OracleResult, OracleError> {
    SyntheticOracle::new(spec.clone())?.formation_energy(s)
}

/// Surrogate energy under `spec` (convenience wrapper).
pub fn surrogate_energy(s: &Structure, spec: &SurrogateSpec) -> Result<f64, OracleError> {
    Surrogate::new(spec)?.energy(s)
}

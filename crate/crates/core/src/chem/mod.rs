//! Elements, compositions, lattices and periodic structures.

mod composition;
mod element;
mod lattice;
mod structure;
mod system;

pub use composition::{composition_l1, Composition};
pub use element::Element;
pub use lattice::{gram_determinant, Lattice};
pub use structure::{wrap_unit, Structure, StructureRecord};
pub use system::ChemicalSystem;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("composition has no elements")]
    EmptyComposition,
    #[error("element {0} has a zero count")]
    ZeroCount(Element),
    #[error("element {0} is not part of the chemical system")]
    ForeignElement(Element),
    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),
    #[error("structure has no sites")]
    EmptyStructure,
    #[error("{species} species but {coords} coordinates")]
    SiteMismatch { species: usize, coords: usize },
    #[error("non-finite fractional coordinate")]
    NonFiniteCoordinate,
    #[error("site index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("structure has {atoms} atoms, system allows at most {max}")]
    TooManyAtoms { atoms: usize, max: u32 },
    #[error("invalid chemical system: {0}")]
    InvalidSystem(String),
}

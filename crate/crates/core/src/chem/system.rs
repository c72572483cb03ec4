use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ChemError, Composition, Element, Structure};

/// The search space: a set of elements and the largest allowed unit cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SystemRecord", into = "SystemRecord")]
pub struct ChemicalSystem {
    elements: Vec<Element>,
    max_atoms: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemRecord {
    elements: Vec<Element>,
    max_atoms: u32,
}

impl ChemicalSystem {
    pub fn new(elements: Vec<Element>, max_atoms: u32) -> Result<Self, ChemError> {
        if elements.len() < 2 {
            return Err(ChemError::InvalidSystem(format!(
                "need at least two elements, got {}",
                elements.len()
            )));
        }
        for (i, el) in elements.iter().enumerate() {
            if elements[..i].contains(el) {
                return Err(ChemError::InvalidSystem(format!("duplicate element {el}")));
            }
        }
        if (max_atoms as usize) < elements.len() {
            return Err(ChemError::InvalidSystem(format!(
                "max_atoms {max_atoms} is smaller than the number of elements {}",
                elements.len()
            )));
        }
        Ok(ChemicalSystem { elements, max_atoms })
    }

    pub fn from_symbols(symbols: &[&str], max_atoms: u32) -> Result<Self, ChemError> {
        let elements = symbols
            .iter()
            .map(|s| Element::from_symbol(s))
            .collect::<Result<Vec<_>, _>>()?;
        ChemicalSystem::new(elements, max_atoms)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn max_atoms(&self) -> u32 {
        self.max_atoms
    }

    pub fn contains(&self, el: Element) -> bool {
        self.elements.contains(&el)
    }

    pub fn index_of(&self, el: Element) -> Option<usize> {
        self.elements.iter().position(|e| *e == el)
    }

    /// Hyphen-joined element symbols, e.g. `Mg-Sn-Sr`.
    pub fn label(&self) -> String {
        self.elements.iter().map(|e| e.symbol()).collect::<Vec<_>>().join("-")
    }

    /// Unit vector of the simplex vertex for `el`.
    pub fn vertex(&self, el: Element) -> Option<Vec<f64>> {
        let i = self.index_of(el)?;
        let mut v = vec![0.0; self.dim()];
        v[i] = 1.0;
        Some(v)
    }

    /// Checks that a structure uses only system elements and fits the atom limit.
    pub fn check_structure(&self, s: &Structure) -> Result<(), ChemError> {
        if let Some(el) = s.species().iter().find(|e| !self.contains(**e)) {
            return Err(ChemError::ForeignElement(*el));
        }
        if s.num_atoms() > self.max_atoms as usize {
            return Err(ChemError::TooManyAtoms {
                atoms: s.num_atoms(),
                max: self.max_atoms,
            });
        }
        Ok(())
    }

    /// Every full formula with 2..=max_atoms atoms and at least two distinct elements.
    ///
    /// Ordered by total atom count, then lexicographically by the count tuple in system
    /// element order.
    pub fn enumerate_compositions(&self) -> Vec<Composition> {
        let d = self.dim();
        let mut out = Vec::new();
        let mut counts = vec![0u32; d];
        for total in 2..=self.max_atoms {
            fill(&mut counts, 0, total, &mut |c| {
                if c.iter().filter(|&&n| n > 0).count() >= 2 {
                    let pairs: Vec<_> = self.elements.iter().copied().zip(c.iter().copied()).collect();
                    out.push(Composition::from_pairs(&pairs).expect("total is positive"));
                }
            });
        }
        out
    }
}

// all tuples of counts[pos..] summing to `remaining`, in lexicographic order
fn fill(counts: &mut Vec<u32>, pos: usize, remaining: u32, emit: &mut impl FnMut(&[u32])) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for n in 0..=remaining {
        counts[pos] = n;
        fill(counts, pos + 1, remaining - n, emit);
    }
}

impl TryFrom<SystemRecord> for ChemicalSystem {
    type Error = ChemError;

    fn try_from(r: SystemRecord) -> Result<Self, Self::Error> {
        ChemicalSystem::new(r.elements, r.max_atoms)
    }
}

impl From<ChemicalSystem> for SystemRecord {
    fn from(s: ChemicalSystem) -> Self {
        SystemRecord {
            elements: s.elements,
            max_atoms: s.max_atoms,
        }
    }
}

impl fmt::Display for ChemicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (max {} atoms)", self.label(), self.max_atoms)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn counts(sys: &ChemicalSystem, c: &Composition) -> Vec<u32> {
        sys.elements().iter().map(|e| c.count(*e)).collect()
    }

    #[test]
    fn binary_enumeration() {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al"], 4).unwrap();
        let got: Vec<_> = sys.enumerate_compositions().iter().map(|c| counts(&sys, c)).collect();
        assert_eq!(got, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![1, 3], vec![2, 2], vec![3, 1]]);

        let sys = ChemicalSystem::from_symbols(&["Fe", "Al"], 2).unwrap();
        let got: Vec<_> = sys.enumerate_compositions().iter().map(|c| counts(&sys, c)).collect();
        assert_eq!(got, vec![vec![1, 1]]);
    }

    #[test]
    fn ternary_enumeration() {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al", "Ni"], 3).unwrap();
        let all = sys.enumerate_compositions();
        // three binary pairs at 2 atoms; at 3 atoms six binaries plus the 1:1:1 ternary
        assert_eq!(all.len(), 10);
        assert_eq!(all.iter().filter(|c| c.total_atoms() == 3).count(), 7);
        assert_eq!(all.iter().filter(|c| c.num_elements() == 3).count(), 1);
    }

    #[test]
    fn enumeration_is_unique_and_normalized() {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al", "Ni", "Co"], 7).unwrap();
        let all = sys.enumerate_compositions();
        let set: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
        assert_eq!(all, sys.enumerate_compositions());
        for c in &all {
            let v = c.vector(&sys).unwrap();
            assert!(v.iter().all(|x| *x >= 0.0));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(c.num_elements() >= 2);
        }
    }

    #[test]
    fn system_validation() {
        assert!(ChemicalSystem::from_symbols(&["Fe"], 4).is_err());
        assert!(ChemicalSystem::from_symbols(&["Fe", "Fe"], 4).is_err());
        assert!(ChemicalSystem::from_symbols(&["Fe", "Al", "Ni"], 2).is_err());
        let sys: ChemicalSystem = serde_json::from_str(r#"{"elements":["Mg","Sn"],"max_atoms":6}"#).unwrap();
        assert_eq!(sys.label(), "Mg-Sn");
        assert!(serde_json::from_str::<ChemicalSystem>(r#"{"elements":["Mg"],"max_atoms":6}"#).is_err());
    }
}

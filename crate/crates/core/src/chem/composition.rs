use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::{ChemError, ChemicalSystem, Element};

/// Atom counts per element, as a full (unit-cell) formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Element, u32>", into = "BTreeMap<Element, u32>")]
pub struct Composition {
    counts: BTreeMap<Element, u32>,
}

impl Composition {
    pub fn new(counts: BTreeMap<Element, u32>) -> Result<Self, ChemError> {
        if counts.is_empty() {
            return Err(ChemError::EmptyComposition);
        }
        if let Some((el, _)) = counts.iter().find(|(_, &n)| n == 0) {
            return Err(ChemError::ZeroCount(*el));
        }
        Ok(Composition { counts })
    }

    /// Builds a composition from a list of species, one entry per atom.
    pub fn from_species<'a>(species: impl IntoIterator<Item = &'a Element>) -> Result<Self, ChemError> {
        let mut counts = BTreeMap::new();
        for el in species {
            *counts.entry(*el).or_insert(0) += 1;
        }
        Composition::new(counts)
    }

    pub fn from_pairs(pairs: &[(Element, u32)]) -> Result<Self, ChemError> {
        let mut counts = BTreeMap::new();
        for &(el, n) in pairs {
            if n > 0 {
                *counts.entry(el).or_insert(0) += n;
            }
        }
        Composition::new(counts)
    }

    pub fn counts(&self) -> &BTreeMap<Element, u32> {
        &self.counts
    }

    pub fn count(&self, el: Element) -> u32 {
        self.counts.get(&el).copied().unwrap_or(0)
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.counts.keys().copied()
    }

    pub fn num_elements(&self) -> usize {
        self.counts.len()
    }

    pub fn total_atoms(&self) -> u32 {
        self.counts.values().sum()
    }

    /// Divides all counts by their greatest common divisor.
    pub fn reduce(&self) -> Composition {
        let g = self.counts.values().fold(0u32, |acc, &n| acc.gcd(&n));
        Composition {
            counts: self.counts.iter().map(|(&el, &n)| (el, n / g)).collect(),
        }
    }

    /// Canonical reduced-formula string, used as a key for formula-level bookkeeping.
    pub fn reduced_formula(&self) -> String {
        self.reduce().to_string()
    }

    /// Fraction of each system element in this composition, in system order.
    pub fn vector(&self, sys: &ChemicalSystem) -> Result<Vec<f64>, ChemError> {
        if let Some(el) = self.elements().find(|el| !sys.contains(*el)) {
            return Err(ChemError::ForeignElement(el));
        }
        let total = f64::from(self.total_atoms());
        Ok(sys
            .elements()
            .iter()
            .map(|el| f64::from(self.count(*el)) / total)
            .collect())
    }

    /// Expands the formula into a species list ordered by the system element order.
    pub fn species_in_order(&self, order: &[Element]) -> Vec<Element> {
        let mut out = Vec::with_capacity(self.total_atoms() as usize);
        for el in order {
            out.extend(std::iter::repeat(*el).take(self.count(*el) as usize));
        }
        for (el, &n) in &self.counts {
            if !order.contains(el) {
                out.extend(std::iter::repeat(*el).take(n as usize));
            }
        }
        out
    }
}

/// L1 distance between the normalized composition vectors of `a` and `b`.
pub fn composition_l1(a: &Composition, b: &Composition, sys: &ChemicalSystem) -> Result<f64, ChemError> {
    let va = a.vector(sys)?;
    let vb = b.vector(sys)?;
    Ok(va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum())
}

impl TryFrom<BTreeMap<Element, u32>> for Composition {
    type Error = ChemError;

    fn try_from(counts: BTreeMap<Element, u32>) -> Result<Self, Self::Error> {
        Composition::new(counts)
    }
}

impl From<Composition> for BTreeMap<Element, u32> {
    fn from(c: Composition) -> Self {
        c.counts
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (el, &n) in &self.counts {
            if n == 1 {
                write!(f, "{el}")?;
            } else {
                write!(f, "{el}{n}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(s: &str) -> Element {
        Element::from_symbol(s).unwrap()
    }

    fn comp(pairs: &[(&str, u32)]) -> Composition {
        Composition::from_pairs(&pairs.iter().map(|(s, n)| (el(s), *n)).collect::<Vec<_>>()).unwrap()
    }

    fn binary() -> ChemicalSystem {
        ChemicalSystem::new(vec![el("Fe"), el("Al")], 8).unwrap()
    }

    #[test]
    fn composition_vectors() {
        let sys = binary();
        assert_eq!(comp(&[("Fe", 1), ("Al", 1)]).vector(&sys).unwrap(), vec![0.5, 0.5]);
        assert_eq!(comp(&[("Fe", 3), ("Al", 1)]).vector(&sys).unwrap(), vec![0.75, 0.25]);
        assert_eq!(
            comp(&[("Fe", 2), ("Al", 2)]).vector(&sys).unwrap(),
            comp(&[("Fe", 1), ("Al", 1)]).vector(&sys).unwrap()
        );
        assert!(matches!(
            comp(&[("Fe", 1), ("Ni", 1)]).vector(&sys),
            Err(ChemError::ForeignElement(_))
        ));
    }

    #[test]
    fn reduction() {
        assert_eq!(comp(&[("Fe", 4), ("Al", 2)]).reduce(), comp(&[("Fe", 2), ("Al", 1)]));
        assert_eq!(comp(&[("Fe", 1), ("Al", 1)]).reduce(), comp(&[("Fe", 1), ("Al", 1)]));
        assert_eq!(
            comp(&[("Fe", 6), ("Al", 3), ("Ni", 3)]).reduce(),
            comp(&[("Fe", 2), ("Al", 1), ("Ni", 1)])
        );
        assert_eq!(comp(&[("Fe", 6), ("Al", 3)]).reduced_formula(), "AlFe2");
    }

    #[test]
    fn l1_distances() {
        let sys = binary();
        let ab = comp(&[("Fe", 1), ("Al", 1)]);
        assert_eq!(composition_l1(&ab, &ab, &sys).unwrap(), 0.0);
        assert_eq!(composition_l1(&comp(&[("Fe", 1)]), &comp(&[("Al", 1)]), &sys).unwrap(), 2.0);
        let a3b = comp(&[("Fe", 3), ("Al", 1)]);
        assert!((composition_l1(&a3b, &ab, &sys).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid() {
        assert!(Composition::new(BTreeMap::new()).is_err());
        let mut m = BTreeMap::new();
        m.insert(el("Fe"), 0);
        assert!(Composition::new(m).is_err());
    }

    #[test]
    fn species_follow_system_order() {
        let c = comp(&[("Fe", 2), ("Al", 1)]);
        assert_eq!(c.species_in_order(&[el("Fe"), el("Al")]), vec![el("Fe"), el("Fe"), el("Al")]);
    }

    proptest::proptest! {
        #[test]
        fn reduce_is_idempotent(a in 1u32..40, b in 1u32..40, c in 0u32..40) {
            let x = comp(&[("Fe", a), ("Al", b), ("Ni", c)]);
            let r = x.reduce();
            proptest::prop_assert_eq!(r.reduce(), r.clone());
            proptest::prop_assert_eq!(x.reduced_formula(), r.to_string());
        }
    }
}

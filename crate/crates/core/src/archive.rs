//! Set of structures with cached fingerprints for repeated uniqueness checks.

use std::collections::HashMap;

use crate::chem::{ChemError, Structure};
use crate::geometry::{amd, AmdVector, MatchPolicy};

/// A structure's matching key: reduced formula plus AMD fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub formula: String,
    pub amd: AmdVector,
}

impl Fingerprint {
    pub fn of(s: &Structure, policy: &MatchPolicy) -> Result<Self, ChemError> {
        Ok(Fingerprint {
            formula: s.composition().reduced_formula(),
            amd: amd(s, policy.amd_k)?,
        })
    }

    pub fn matches(&self, other: &Fingerprint, policy: &MatchPolicy) -> bool {
        (!policy.require_same_reduced_formula || self.formula == other.formula) && self.amd.linf(&other.amd) <= policy.amd_tol
    }
}

#[derive(Debug, Clone)]
pub struct StructureArchive {
    policy: MatchPolicy,
    by_formula: HashMap<String, Vec<AmdVector>>,
    len: usize,
}

impl StructureArchive {
    pub fn new(policy: MatchPolicy) -> Self {
        StructureArchive {
            policy,
            by_formula: HashMap::new(),
            len: 0,
        }
    }

    pub fn policy(&self) -> &MatchPolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fingerprint(&self, s: &Structure) -> Result<Fingerprint, ChemError> {
        Fingerprint::of(s, &self.policy)
    }

    pub fn contains_fingerprint(&self, fp: &Fingerprint) -> bool {
        let within = |v: &AmdVector| v.linf(&fp.amd) <= self.policy.amd_tol;
        if self.policy.require_same_reduced_formula {
            self.by_formula.get(&fp.formula).is_some_and(|vs| vs.iter().any(within))
        } else {
            self.by_formula.values().flatten().any(within)
        }
    }

    pub fn contains_match(&self, s: &Structure) -> Result<bool, ChemError> {
        Ok(self.contains_fingerprint(&self.fingerprint(s)?))
    }

    pub fn insert_fingerprint(&mut self, fp: Fingerprint) {
        self.by_formula.entry(fp.formula).or_default().push(fp.amd);
        self.len += 1;
    }

    pub fn insert(&mut self, s: &Structure) -> Result<(), ChemError> {
        let fp = self.fingerprint(s)?;
        self.insert_fingerprint(fp);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;
    use crate::chem::{Element, Lattice};

    #[test]
    fn finds_exact_copies_only() {
        let fe = Element::from_symbol("Fe").unwrap();
        let al = Element::from_symbol("Al").unwrap();
        let a = Structure::new(
            Lattice::cubic(4.0).unwrap(),
            vec![fe, al],
            vec![Vector3::zeros(), Vector3::new(0.5, 0.5, 0.5)],
        )
        .unwrap();
        let b = Structure::new(
            Lattice::cubic(5.0).unwrap(),
            vec![fe, al],
            vec![Vector3::zeros(), Vector3::new(0.5, 0.5, 0.5)],
        )
        .unwrap();
        let mut archive = StructureArchive::new(MatchPolicy::default());
        assert!(!archive.contains_match(&a).unwrap());
        archive.insert(&a).unwrap();
        assert!(archive.contains_match(&a).unwrap());
        assert!(archive.contains_match(&a.supercell([1, 2, 1]).unwrap()).unwrap());
        assert!(!archive.contains_match(&b).unwrap());
        assert_eq!(archive.len(), 1);
    }
}

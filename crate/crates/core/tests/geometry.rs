mod common;

use common::{check_amd_invariances, check_simple_cubic, el, random_structure};
use discobench_core::archive::StructureArchive;
use discobench_core::chem::{Lattice, Structure};
use discobench_core::geometry::{amd, structures_match, MatchPolicy};
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn simple_cubic_shells() {
    for a in [1.0, 2.5, 4.2] {
        check_simple_cubic(a).unwrap();
    }
}

#[test]
fn amd_is_nondecreasing() {
    let mut rng = discobench_core::seed::rng(1);
    let s = random_structure(&mut rng, &[el("Fe"), el("Al"), el("Al")], 1.0);
    let v = amd(&s, 100).unwrap();
    assert!(v.values().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn distinct_polymorphs_do_not_match() {
    let policy = MatchPolicy::default();
    let fcc = Structure::fcc(el("Fe"), 4.0).unwrap();
    let sc = Structure::new(Lattice::cubic(2.5).unwrap(), vec![el("Fe")], vec![Vector3::zeros()]).unwrap();
    assert!(!structures_match(&fcc, &sc, &policy).unwrap());
    let strained = Structure::fcc(el("Fe"), 4.2).unwrap();
    assert!(!structures_match(&fcc, &strained, &policy).unwrap());
    let tiny = Structure::fcc(el("Fe"), 4.01).unwrap();
    assert!(structures_match(&fcc, &tiny, &policy).unwrap());
}

#[test]
fn same_geometry_different_formula_is_not_a_match() {
    let policy = MatchPolicy::default();
    let a = Structure::fcc(el("Fe"), 4.0).unwrap();
    let b = Structure::fcc(el("Ni"), 4.0).unwrap();
    assert!(!structures_match(&a, &b, &policy).unwrap());
    let loose = MatchPolicy {
        require_same_reduced_formula: false,
        ..MatchPolicy::default()
    };
    assert!(structures_match(&a, &b, &loose).unwrap());
}

#[test]
fn archive_lookup_agrees_with_pairwise_matching() {
    let policy = MatchPolicy::default();
    let mut rng = discobench_core::seed::rng(2);
    let pool: Vec<Structure> = (0..12)
        .map(|i| {
            let species = if i % 2 == 0 { vec![el("Fe"), el("Al")] } else { vec![el("Fe"), el("Fe"), el("Al")] };
            random_structure(&mut rng, &species, 1.0)
        })
        .collect();
    let mut archive = StructureArchive::new(policy.clone());
    for s in &pool[..6] {
        archive.insert(s).unwrap();
    }
    for s in &pool {
        let expected = pool[..6].iter().any(|t| structures_match(s, t, &policy).unwrap());
        assert_eq!(archive.contains_match(s).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn amd_invariances(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = discobench_core::seed::rng(seed);
        let species: Vec<_> = ["Fe", "Al", "Ni", "Al"][..n].iter().map(|s| el(s)).collect();
        let s = random_structure(&mut rng, &species, 0.5);
        prop_assert_eq!(check_amd_invariances(&s, &mut rng), Ok(()));
    }
}

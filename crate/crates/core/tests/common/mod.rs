//! Helpers shared by the integration tests.
#![allow(dead_code)]

use discobench_core::chem::{ChemicalSystem, Element, Lattice, Structure};
use discobench_core::geometry::{amd, min_pair_distance, structures_match, MatchPolicy};
use discobench_core::oracle::{pair_energy_and_forces, SyntheticOracleSpec};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

pub fn el(s: &str) -> Element {
    Element::from_symbol(s).unwrap()
}

/// Atoms of the given per-element counts spread along the body diagonal of a cube.
pub fn structure_with_counts(system: &ChemicalSystem, counts: &[u32]) -> Structure {
    let mut species = Vec::new();
    for (e, &n) in system.elements().iter().zip(counts) {
        species.extend(std::iter::repeat(*e).take(n as usize));
    }
    let n = species.len() as f64;
    let coords = (0..species.len())
        .map(|i| {
            let f = i as f64 / n;
            Vector3::new(f, f, f)
        })
        .collect();
    Structure::new(Lattice::cubic(3.0 * n).unwrap(), species, coords).unwrap()
}

/// Random triclinic cell with the given species, resampled until atoms are at least
/// `min_dist` apart.
pub fn random_structure<R: Rng>(rng: &mut R, species: &[Element], min_dist: f64) -> Structure {
    loop {
        let l: [f64; 3] = std::array::from_fn(|_| rng.gen_range(3.0..8.0));
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(65.0..115.0));
        let Ok(lattice) = Lattice::from_parameters(l[0], l[1], l[2], a[0], a[1], a[2]) else {
            continue;
        };
        let coords = species
            .iter()
            .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let s = Structure::new(lattice, species.to_vec(), coords).unwrap();
        if min_pair_distance(&s) > min_dist {
            return s;
        }
    }
}

/// Lowest convex-combination energy at `x`, by enumerating every subset of at most
/// `x.len()` points and solving for its barycentric weights.
pub fn brute_force_hull_energy(points: &[(Vec<f64>, f64)], x: &[f64]) -> f64 {
    let d = x.len();
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut subset = Vec::new();
    fn rec(
        start: usize,
        n: usize,
        d: usize,
        subset: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            visit(subset);
        }
        if subset.len() == d {
            return;
        }
        for i in start..n {
            subset.push(i);
            rec(i + 1, n, d, subset, visit);
            subset.pop();
        }
    }
    let target = DVector::from_column_slice(x);
    rec(0, n, d, &mut subset, &mut |s: &[usize]| {
        let a = DMatrix::from_fn(d, s.len(), |r, c| points[s[c]].0[r]);
        let Ok(w) = a.clone().svd(true, true).solve(&target, 1e-13) else {
            return;
        };
        if (&a * &w - &target).amax() > 1e-10 || w.iter().any(|v| *v < -1e-12) {
            return;
        }
        let e: f64 = s.iter().zip(w.iter()).map(|(i, wi)| wi * points[*i].1).sum();
        best = best.min(e);
    });
    best
}

/// Largest deviation between analytic forces and central finite differences of the
/// energy (step `h`, Å), relative to `max(1, |F|)` component-wise.
pub fn force_error(s: &Structure, spec: &SyntheticOracleSpec, h: f64) -> f64 {
    let (_, forces) = pair_energy_and_forces(s, spec);
    let cart = s.cartesian_coords();
    let energy_at = |pos: &[Vector3<f64>]| {
        let moved = Structure::from_cartesian(s.lattice().clone(), s.species().to_vec(), pos).unwrap();
        pair_energy_and_forces(&moved, spec).0
    };
    let mut worst: f64 = 0.0;
    for i in 0..cart.len() {
        for k in 0..3 {
            let mut plus = cart.clone();
            plus[i][k] += h;
            let mut minus = cart.clone();
            minus[i][k] -= h;
            let fd = -(energy_at(&plus) - energy_at(&minus)) / (2.0 * h);
            let f = forces[i][k];
            worst = worst.max((fd - f).abs() / f.abs().max(1.0));
        }
    }
    worst
}

fn rotation(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

fn amd_close(a: &Structure, b: &Structure, k: usize, tol: f64) -> Result<(), String> {
    let d = amd(a, k).map_err(|e| e.to_string())?.linf(&amd(b, k).map_err(|e| e.to_string())?);
    if d <= tol {
        Ok(())
    } else {
        Err(format!("AMD differs by {d:e}"))
    }
}

/// Checks fingerprint invariance under rotation, reflection, origin shift, atom
/// permutation, coordinate wrapping and supercell expansion for one structure.
pub fn check_amd_invariances<R: Rng>(s: &Structure, rng: &mut R) -> Result<(), String> {
    const K: usize = 100;
    const TOL: f64 = 1e-9;
    let n = s.num_atoms();
    let policy = MatchPolicy::default();

    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0));
    let mut q = rotation(axis, rng.gen_range(0.0..std::f64::consts::TAU));
    if rng.gen_bool(0.5) {
        q = -q;
    }
    let mut m = s.lattice().matrix() * q.transpose();
    let mut frac = s.frac_coords().to_vec();
    if q.determinant() < 0.0 {
        // an improper map flips handedness; swapping two cell vectors restores it
        m.swap_rows(0, 1);
        for f in &mut frac {
            f.swap_rows(0, 1);
        }
    }
    let rotated_lattice = Lattice::new(m).map_err(|e| e.to_string())?;
    let rotated = Structure::new(rotated_lattice, s.species().to_vec(), frac).unwrap();
    amd_close(s, &rotated, K, TOL).map_err(|e| format!("isometry: {e}"))?;

    let t = Vector3::new(rng.gen(), rng.gen(), rng.gen());
    let shifted = s.with_frac_coords(s.frac_coords().iter().map(|f| f + t).collect()).unwrap();
    amd_close(s, &shifted, K, TOL).map_err(|e| format!("translation: {e}"))?;

    let unwrapped = s
        .with_frac_coords(
            s.frac_coords()
                .iter()
                .map(|f| f + Vector3::new(rng.gen_range(-3..3) as f64, rng.gen_range(-3..3) as f64, 1.0))
                .collect(),
        )
        .unwrap();
    amd_close(s, &unwrapped, K, TOL).map_err(|e| format!("wrapping: {e}"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.reverse();
    order.rotate_left(n / 2);
    let permuted = Structure::new(
        s.lattice().clone(),
        order.iter().map(|i| s.species()[*i]).collect(),
        order.iter().map(|i| s.frac_coords()[*i]).collect(),
    )
    .unwrap();
    amd_close(s, &permuted, K, TOL).map_err(|e| format!("permutation: {e}"))?;

    let reps = [rng.gen_range(1..=2), rng.gen_range(1..=2), 2];
    let sc = s.supercell(reps).unwrap();
    amd_close(s, &sc, K, TOL).map_err(|e| format!("supercell {reps:?}: {e}"))?;

    for other in [&rotated, &shifted, &permuted, &sc] {
        if !structures_match(s, other, &policy).unwrap() || !structures_match(other, s, &policy).unwrap() {
            return Err("equivalent structures do not match".into());
        }
    }
    Ok(())
}

/// Simple cubic lattice with a single atom: the shells lie at a, a√2, a√3 and 2a with
/// 6, 12, 8 and 6 members.
pub fn check_simple_cubic(a: f64) -> Result<(), String> {
    let s = Structure::new(Lattice::cubic(a).unwrap(), vec![el("Fe")], vec![Vector3::zeros()]).unwrap();
    let v = amd(&s, 32).unwrap();
    let mut expected = Vec::new();
    for (count, r) in [(6, 1.0), (12, 2f64.sqrt()), (8, 3f64.sqrt()), (6, 2.0)] {
        expected.extend(std::iter::repeat(r * a).take(count));
    }
    for (j, (got, want)) in v.values().iter().zip(&expected).enumerate() {
        if (got - want).abs() > 1e-9 {
            return Err(format!("entry {j}: {got} vs {want}"));
        }
    }
    Ok(())
}

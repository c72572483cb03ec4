use discobench_core::archive::StructureArchive;
use discobench_core::chem::{ChemicalSystem, Structure};
use discobench_core::geometry::{min_pair_distance, MatchPolicy};
use discobench_core::hull::{HullState, Origin};
use discobench_core::oracle::{formation_energy, Surrogate, SurrogateSpec, SyntheticOracle, SyntheticOracleSpec};
use discobench_core::policy::filter::{apply_filters, FilterSpec};
use discobench_core::policy::generator::generate_random;
use discobench_core::policy::planner::{DiversityPlanner, DiversityWeights};
use discobench_core::policy::{select_surrogate, PlannerState, SurrogatePool};
use proptest::prelude::*;

fn ternary() -> ChemicalSystem {
    ChemicalSystem::from_symbols(&["Mg", "Sn", "Sr"], 5).unwrap()
}

fn hull_for(system: &ChemicalSystem, spec: &SyntheticOracleSpec) -> HullState {
    let oracle = SyntheticOracle::new(spec.clone()).unwrap();
    HullState::new(system.clone(), 0.1, |e| {
        discobench_core::oracle::Oracle::elemental_reference(&oracle, e)
    })
    .unwrap()
}

fn surrogate(sigma: f64) -> Surrogate {
    Surrogate::new(&SurrogateSpec {
        base: SyntheticOracleSpec::default(),
        noise_sigma: sigma,
        noise_seed: 9,
    })
    .unwrap()
}

fn batches(system: &ChemicalSystem, n: usize, seed: u64) -> Vec<discobench_core::policy::CandidateBatch> {
    let mut rng = discobench_core::seed::rng(seed);
    let comps = system.enumerate_compositions();
    (0..3)
        .map(|i| generate_random(&comps[(i * 7) % comps.len()], n, system, &mut rng))
        .collect()
}

#[test]
fn surrogate_selection_is_the_independent_argmin() {
    let sys = ternary();
    let spec = SyntheticOracleSpec::default();
    let mut hull = hull_for(&sys, &spec);
    let sur = surrogate(0.05);
    let mut pool = SurrogatePool::new(batches(&sys, 4, 1), &sur, &sys).unwrap();

    for round in 0..6 {
        // recompute every score from scratch against the current hull
        let expected = pool
            .predictions()
            .into_iter()
            .map(|(s, pred)| {
                let x = s.composition().vector(&sys).unwrap();
                let score = pred - hull.hull_energy_at(&x, None).unwrap().energy;
                (s, score)
            })
            .fold(None::<(Structure, f64)>, |best, (s, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((s, v)),
            })
            .unwrap()
            .0;
        let before = pool.remaining();
        let chosen = select_surrogate(&mut pool, &hull, None).unwrap();
        assert_eq!(chosen, expected, "round {round}");
        assert_eq!(pool.remaining(), before - 1);
        let e = formation_energy(&chosen, &spec).unwrap();
        hull.add_entry(e.relaxed, e.energy_per_atom, Origin::Proposed { query: round + 1 }).unwrap();
    }
}

#[test]
fn zero_noise_ranks_by_true_energy_and_ties_go_first() {
    let sys = ternary();
    let spec = SyntheticOracleSpec::default();
    let hull = hull_for(&sys, &spec);
    let sur = surrogate(0.0);
    let b = batches(&sys, 3, 2);
    let mut pool = SurrogatePool::new(b.clone(), &sur, &sys).unwrap();
    for (s, pred) in pool.predictions() {
        assert_eq!(pred, formation_energy(&s, &spec).unwrap().energy_per_atom);
    }

    // duplicate the first structure: identical scores, the earlier copy wins
    let mut doubled = b[0].clone();
    doubled.structures = vec![doubled.structures[0].clone(), doubled.structures[0].clone()];
    let mut twin = SurrogatePool::new(vec![doubled], &sur, &sys).unwrap();
    select_surrogate(&mut twin, &hull, None).unwrap();
    assert_eq!(twin.remaining(), 1);

    let mut seen = StructureArchive::new(MatchPolicy::default());
    let first = select_surrogate(&mut pool, &hull, None).unwrap();
    seen.insert(&first).unwrap();
    let second = select_surrogate(&mut pool, &hull, Some(&seen)).unwrap();
    assert!(!seen.contains_match(&second).unwrap());
}

#[test]
fn exhausted_pool_errors() {
    let sys = ternary();
    let hull = hull_for(&sys, &SyntheticOracleSpec::default());
    let mut pool = SurrogatePool::new(batches(&sys, 1, 3), &surrogate(0.05), &sys).unwrap();
    for _ in 0..3 {
        select_surrogate(&mut pool, &hull, None).unwrap();
    }
    assert!(pool.is_empty());
    assert!(select_surrogate(&mut pool, &hull, None).is_err());
}

#[test]
fn diversity_plan_is_the_exhaustive_maximum() {
    let sys = ternary();
    let planner = DiversityPlanner::new(&sys, DiversityWeights::default());
    let comps = planner.compositions().to_vec();
    let mut state = PlannerState::default();
    let mut rng = discobench_core::seed::rng(4);
    for step in 0..25 {
        let chosen = planner.plan(&state).unwrap();
        // independent recomputation of w(c) * D(c)
        let mut refs: Vec<(String, Vec<f64>)> = sys
            .elements()
            .iter()
            .map(|e| (e.symbol().to_string(), sys.vertex(*e).unwrap()))
            .collect();
        for c in &comps {
            if state.attempts(c) > 0 {
                refs.push((c.reduced_formula(), c.vector(&sys).unwrap()));
            }
        }
        let score = |c: &discobench_core::chem::Composition| {
            let x = c.vector(&sys).unwrap();
            let f = c.reduced_formula();
            let d = refs
                .iter()
                .filter(|(g, _)| *g != f)
                .map(|(_, y)| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            let w = match state.attempts(c) {
                0 => 5.0,
                n => 0.7 / (f64::from(n) + 1.0) + 0.3 * (1.0 - state.success_rate(c)),
            };
            w * d
        };
        let best = comps.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
        assert!((score(&chosen) - best).abs() < 1e-12, "step {step}");
        let first = comps.iter().position(|c| (score(c) - best).abs() < 1e-12).unwrap();
        assert_eq!(comps[first], chosen);
        state.record(&chosen, rand::Rng::gen_bool(&mut rng, 0.3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filters_keep_an_ordered_subset(seed in any::<u64>(), min_distance in 0.2f64..2.0) {
        let sys = ChemicalSystem::from_symbols(&["Fe", "Al"], 6).unwrap();
        let mut rng = discobench_core::seed::rng(seed);
        let comps = sys.enumerate_compositions();
        let batch = generate_random(&comps[comps.len() / 2], 16, &sys, &mut rng);
        let mut seen = StructureArchive::new(MatchPolicy::default());
        seen.insert(&batch.structures[0]).unwrap();
        let spec = FilterSpec { min_distance, ..FilterSpec::default() };
        let kept = apply_filters(batch.clone(), &spec, &seen).unwrap();
        let mut it = batch.structures.iter();
        for s in &kept.structures {
            prop_assert!(it.any(|t| t == s), "not an ordered subsequence");
            prop_assert!(min_pair_distance(s) >= min_distance);
            prop_assert!(!seen.contains_match(s).unwrap());
        }
        prop_assert_eq!(&kept.composition, &batch.composition);
        let everything = FilterSpec { distance: false, uniqueness: false, ..FilterSpec::default() };
        prop_assert_eq!(apply_filters(batch.clone(), &everything, &seen).unwrap(), batch);
    }

    #[test]
    fn generated_structures_have_the_planned_composition(seed in any::<u64>()) {
        let sys = ternary();
        let mut rng = discobench_core::seed::rng(seed);
        let comps = sys.enumerate_compositions();
        let c = &comps[rand::Rng::gen_range(&mut rng, 0..comps.len())];
        let batch = generate_random(c, 8, &sys, &mut rng);
        prop_assert_eq!(batch.structures.len(), 8);
        for s in &batch.structures {
            prop_assert_eq!(&s.composition(), c);
            prop_assert!(sys.check_structure(s).is_ok());
        }
    }
}

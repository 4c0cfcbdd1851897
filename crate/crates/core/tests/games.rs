mod common;

use combforge::comb::{random_comb, CombEnsemble, EnsembleCollection};
use combforge::conic::Sense;
use combforge::games::*;
use combforge::instances::*;
use combforge::sampling::{derive_seed, rng_from_seed};
use combforge::tester::{validate_tester, TesterCollection};
use combforge::Error;
use proptest::prelude::*;

fn ensembles_for(c: &TesterCollection, s: usize, seed: u64) -> EnsembleCollection {
    random_ensembles(c.signature(), s, c.outcomes(), 2, seed).unwrap()
}

/// Compatible collection obtained by post-processing a random parent of the
/// given signature.
fn sampled_compatible(c: &TesterCollection, seed: u64) -> TesterCollection {
    let shape = if c.signature().is_probe_trivial() {
        NetworkShape::probe_trivial(c.slots(), c.signature().dim(1))
    } else {
        NetworkShape::qubits(c.slots())
    };
    compatible_collection(&shape, c.len(), c.outcomes(), 4, seed).unwrap().0
}

#[test]
fn perfectly_distinguishable_pair_is_always_guessed() {
    // Combs |0><0| and |1><1| on a qubit output, measured in Z.
    let c = qubit_mub_collection(2, 1).unwrap();
    let comb_sig = c.signature().dual();
    let combs: Vec<_> = (0..2)
        .map(|a| combforge::comb::validate_comb(c.effect(a, 0), comb_sig.slots()).unwrap())
        .collect();
    let e = CombEnsemble::new(combs, vec![0.5, 0.5]).unwrap();
    let g = EnsembleCollection::new(vec![e], vec![1.0]).unwrap();
    assert!((qcd_value_incompatible(&g, &c).unwrap() - 1.0).abs() < 1e-12);
    // The Z-effects are orthogonal to the comb they do not match.
    let swapped = validate_tester(&[c.effect(1, 0).clone(), c.effect(0, 0).clone()], 1).unwrap();
    let t = TesterCollection::new(vec![swapped]).unwrap();
    assert!(exclusion_value(&g, &t).unwrap().abs() < 1e-12);
}

#[test]
fn certain_ensemble_is_won_by_guessing() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, 1).unwrap();
    let g = ensembles_for(&c, 1, 3);
    let combs = g.ensembles()[0].combs().to_vec();
    let certain = EnsembleCollection::new(vec![CombEnsemble::new(combs, vec![1.0, 0.0]).unwrap()], vec![1.0]).unwrap();
    assert!((qcd_value_incompatible(&certain, &c).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn single_ensemble_has_no_side_information_advantage() {
    for seed in 0..3 {
        let c = random_collection(&NetworkShape::qubits(1), 1, 2, PovmKind::Generic, seed).unwrap();
        let g = ensembles_for(&c, 1, seed + 10);
        let best_single = qcd_value_compatible(&g).unwrap();
        // Helstrom-type bound: compatible value equals the optimal single tester.
        assert!(best_single >= qcd_value_incompatible(&g, &c).unwrap() - 1e-8);
        let opt = qcd_compatible_optimum(&g, 81).unwrap();
        let t = validate_tester(&opt.parent, c.slots()).unwrap();
        let t = TesterCollection::new(vec![t]).unwrap();
        assert!((qcd_value_incompatible(&g, &t).unwrap() - best_single).abs() < 1e-6);
    }
}

#[test]
fn identical_combs_make_testers_useless() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Projective, 2).unwrap();
    let comb = random_comb(&c.signature().dual(), &[], 4).unwrap();
    let mut rng = rng_from_seed(9);
    let ensembles: Vec<_> = (0..2)
        .map(|_| CombEnsemble::new(vec![comb.clone(), comb.clone()], combforge::sampling::dirichlet_uniform(&mut rng, 2)).unwrap())
        .collect();
    let g = EnsembleCollection::new(ensembles, vec![0.3, 0.7]).unwrap();
    let expect: f64 = (0..2)
        .map(|beta| g.weights()[beta] * g.ensembles()[beta].weights().iter().cloned().fold(0.0, f64::max))
        .sum();
    assert!((qcd_value_compatible(&g).unwrap() - expect).abs() < 1e-6);
    assert!((qcd_value_incompatible(&g, &c).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn single_outcome_exclusion_is_a_direct_sum() {
    let c = random_collection(&NetworkShape::qubits(1), 1, 1, PovmKind::Generic, 5).unwrap();
    let g = random_ensembles(c.signature(), 1, 1, 2, 6).unwrap();
    let direct = c.testers()[0].effect_sum().inner(g.comb(0, 0).choi()).unwrap();
    assert!((exclusion_value(&g, &c).unwrap() - direct).abs() < 1e-12);
    assert!((direct - 1.0).abs() < 1e-10);
}

#[test]
fn exclusion_with_one_tester_is_the_best_single_tester() {
    let c = random_collection(&NetworkShape::qubits(1), 1, 2, PovmKind::Generic, 5).unwrap();
    let g = ensembles_for(&c, 1, 8);
    let opt = exclusion_compatible_optimum(&g, 64).unwrap();
    let t = TesterCollection::new(vec![validate_tester(&opt.parent, 1).unwrap()]).unwrap();
    assert!((exclusion_value(&g, &t).unwrap() - opt.value).abs() < 1e-6);
    assert!(opt.value <= exclusion_value(&g, &c).unwrap() + 1e-8);
}

#[test]
fn identical_ensembles_reduce_exclusion_to_one_tester() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, 5).unwrap();
    let g1 = ensembles_for(&c, 1, 8);
    let e = g1.ensembles()[0].clone();
    let g2 = EnsembleCollection::new(vec![e.clone(), e], vec![0.4, 0.6]).unwrap();
    let single = exclusion_value_compatible(&g1).unwrap();
    let double = exclusion_value_compatible(&g2).unwrap();
    assert!((single - double).abs() < 1e-6);
}

#[test]
fn exclusion_needs_aligned_shapes() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, 5).unwrap();
    let g = random_ensembles(c.signature(), 3, 2, 2, 1).unwrap();
    assert!(matches!(exclusion_value(&g, &c), Err(Error::SignatureMismatch(_))));
    assert!(exclusion_value_relaxed(&g, &c).is_ok());
    let other = random_collection(&NetworkShape::probe_trivial(1, 2), 2, 2, PovmKind::Generic, 5).unwrap();
    assert!(matches!(qcd_value_incompatible(&g, &other), Err(Error::SignatureMismatch(_))));
}

#[test]
fn relaxed_exclusion_is_never_worse() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, 5).unwrap();
    let g = ensembles_for(&c, 2, 4);
    assert!(exclusion_value_relaxed(&g, &c).unwrap() <= exclusion_value(&g, &c).unwrap() + 1e-12);
}

#[test]
fn compatible_values_bound_sampled_compatible_collections() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, 11).unwrap();
    let g = ensembles_for(&c, 2, 12);
    let qcd = qcd_value_compatible(&g).unwrap();
    let exc = exclusion_value_compatible(&g).unwrap();
    for i in 0..100 {
        let s = sampled_compatible(&c, derive_seed(13, i));
        assert!(qcd_value_incompatible(&g, &s).unwrap() <= qcd + 1e-8);
        assert!(exclusion_value(&g, &s).unwrap() >= exc - 1e-8);
    }
}

#[test]
fn witness_from_a_compatible_collection_is_degenerate() {
    let (c, _) = compatible_collection(&NetworkShape::qubits(1), 2, 2, 3, 1).unwrap();
    let cert = combforge::incompat::robustness(&c).unwrap();
    assert!(matches!(
        ensemble_from_robustness_dual(&cert, c.signature()),
        Err(Error::DegenerateRobustness(_))
    ));
    let opts = VerifyOptions { random_ensembles: 5, ..VerifyOptions::default() };
    let r1 = verify_theorem1(&c, &opts).unwrap();
    assert!(r1.witness.is_none());
    assert_eq!(r1.violations, 0);
    let r2 = verify_theorem2(&c, &opts).unwrap();
    assert!(r2.witness.is_none());
    assert_eq!(r2.violations, 0);
}

#[test]
fn zero_duals_are_rejected() {
    let c = qubit_mub_collection(2, 1).unwrap();
    let z = combforge::tensor::HermitianOperator::zeros(c.signature().systems());
    let duals = vec![vec![z.clone(), z.clone()], vec![z.clone(), z]];
    assert!(matches!(witness_ensemble(&duals, c.signature()), Err(Error::ZeroDual)));
}

#[test]
fn channel_tester_witnesses_report_residuals() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Projective, 2).unwrap();
    let opts = VerifyOptions { random_ensembles: 5, ..VerifyOptions::default() };
    let r = verify_theorem1(&c, &opts).unwrap();
    let w = r.witness.unwrap();
    for (row, qs) in w.residuals.iter().zip(&w.weights) {
        for (res, &q) in row.iter().zip(qs) {
            assert_eq!(res.is_some(), q > 0.0);
        }
    }
    let any_invalid = w.residuals.iter().flatten().flatten().any(|r| !r.is_valid());
    assert_eq!(any_invalid, !w.witness_valid);
}

#[test]
fn vector_game_slater_points() {
    let c = random_collection(&NetworkShape::qubits(2), 2, 2, PovmKind::Generic, 1).unwrap();
    let g = random_ensembles(c.signature(), 2, 2, 2, 5).unwrap();
    assert!(vector_game_slater_check(&g, Sense::Maximize, 81).unwrap().is_strict(1e-9));
    assert!(vector_game_slater_check(&g, Sense::Minimize, 81).unwrap().is_strict(1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn greedy_strategy_matches_enumeration(seed in 0u64..10_000, s in 1usize..=2, m in 1usize..=2) {
        let c = random_collection(&NetworkShape::qubits(1), m, 2, PovmKind::Generic, seed).unwrap();
        let g = ensembles_for(&c, s, seed + 1);
        let fast = qcd_value_incompatible(&g, &c).unwrap();
        let slow = common::brute_force_qcd(&g, &c, 10_000).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-10);
    }

    #[test]
    fn values_are_probabilities(seed in 0u64..10_000) {
        let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, seed).unwrap();
        let g = ensembles_for(&c, 2, seed + 3);
        let q = qcd_value_incompatible(&g, &c).unwrap();
        let qc = qcd_value_compatible(&g).unwrap();
        let e = exclusion_value(&g, &c).unwrap();
        let ec = exclusion_value_compatible(&g).unwrap();
        for v in [q, qc, e, ec] {
            prop_assert!((-1e-8..=1.0 + 1e-8).contains(&v));
        }
    }

    #[test]
    fn exclusion_matches_resummation(seed in 0u64..10_000) {
        let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, seed).unwrap();
        let g = ensembles_for(&c, 2, seed + 5);
        let mut direct = 0.0;
        for beta in 0..2 {
            for b in 0..2 {
                direct += g.weights()[beta] * g.ensembles()[beta].weights()[b]
                    * c.testers()[beta].effects()[b].inner(g.ensembles()[beta].combs()[b].choi()).unwrap();
            }
        }
        prop_assert!((exclusion_value(&g, &c).unwrap() - direct).abs() < 1e-12);
    }
}

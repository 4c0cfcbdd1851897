mod common;

use combforge::incompat::*;
use combforge::instances::*;
use combforge::sampling::{haar_unitary, rng_from_seed};
use combforge::tester::{simulate_collection, PostProcessing, Simulation, TesterCollection};
use combforge::Error;
use proptest::prelude::*;

const GAP: f64 = 1e-6;

fn local_unitary(c: &TesterCollection, seed: u64) -> nalgebra::DMatrix<combforge::tensor::C64> {
    let mut rng = rng_from_seed(seed);
    c.signature()
        .dims()
        .iter()
        .map(|&d| haar_unitary(&mut rng, d))
        .reduce(|a, b| a.kronecker(&b))
        .unwrap()
}

#[test]
fn mub_pair_values_are_known_in_closed_form() {
    let c = qubit_mub_collection(2, 1).unwrap();
    let r = robustness(&c).unwrap();
    // 1 / (1 + R) = cos^2(pi / 8) for the Z/X pair.
    let expect = 1.0 / (std::f64::consts::PI / 8.0).cos().powi(2) - 1.0;
    assert!((r.value - expect).abs() < 1e-6, "{} vs {expect}", r.value);
    assert!(r.gap <= GAP);
    let w = convex_weight(&c).unwrap();
    assert!((w.value - 1.0).abs() < 1e-6);
}

#[test]
fn probe_trivial_values_match_povm_programs() {
    for seed in 0..6 {
        let c = random_collection(&NetworkShape::probe_trivial(1, 2), 2, 2, PovmKind::Projective, seed).unwrap();
        let r = robustness(&c).unwrap().value;
        let w = convex_weight(&c).unwrap().value;
        assert!((r - common::povm_robustness(&c)).abs() < 1e-6, "seed {seed}");
        assert!((w - common::povm_weight(&c)).abs() < 1e-6, "seed {seed}");
    }
    let c = random_collection(&NetworkShape::probe_trivial(1, 3), 2, 3, PovmKind::Generic, 1).unwrap();
    assert!((robustness(&c).unwrap().value - common::povm_robustness(&c)).abs() < 1e-6);
    assert!((convex_weight(&c).unwrap().value - common::povm_weight(&c)).abs() < 1e-6);
}

#[test]
fn trivial_cases() {
    let c = qubit_mub_collection(2, 2).unwrap();
    let twice = TesterCollection::new(vec![c.testers()[0].clone(), c.testers()[0].clone()]).unwrap();
    assert!(is_compatible_collection(&twice).is_compatible());
    let single = TesterCollection::new(vec![c.testers()[1].clone()]).unwrap();
    assert!(is_compatible_collection(&single).is_compatible());
    assert!(robustness(&single).unwrap().value < 1e-6);
    assert!(convex_weight(&single).unwrap().value < 1e-6);
    assert!(!is_compatible_collection(&c).is_compatible());
}

#[test]
fn mismatched_probes_are_incompatible_without_a_program() {
    let a = random_collection(&NetworkShape::qubits(1), 1, 2, PovmKind::Generic, 1).unwrap();
    let b = random_collection(&NetworkShape::qubits(1), 1, 2, PovmKind::Generic, 2).unwrap();
    let c = TesterCollection::new(vec![a.testers()[0].clone(), b.testers()[0].clone()]).unwrap();
    match is_compatible_collection(&c) {
        Compatibility::Incompatible { margin: None, .. } => {}
        v => panic!("{v:?}"),
    }
}

#[test]
fn cap_is_enforced() {
    let c = random_collection(&NetworkShape::probe_trivial(1, 2), 4, 3, PovmKind::Generic, 0).unwrap();
    assert!(matches!(robustness(&c), Err(Error::CapExceeded { needed: 81, cap: 64, .. })));
    assert!(matches!(convex_weight(&c), Err(Error::CapExceeded { .. })));
    assert!(matches!(is_compatible_collection(&c), Compatibility::Undecided { .. }));
    assert!(robustness_with_cap(&c, 81).is_ok());
}

#[test]
fn noise_testers_close_the_loop() {
    let c = qubit_mub_collection(2, 2).unwrap();
    let cert = robustness(&c).unwrap();
    let noise = reconstruct_noise_testers(&c, &cert).unwrap();
    let r = cert.value;
    let mixed: Vec<_> = c
        .testers()
        .iter()
        .zip(noise.testers())
        .map(|(t, n)| combforge::tester::mix_testers(t, n, 1.0 / (1.0 + r)).unwrap())
        .collect();
    let mixed = TesterCollection::new(mixed).unwrap();
    assert!(is_compatible_collection(&mixed).is_compatible());
    // Chains mix to the rescaled parent chain.
    let theta1 = &cert.chain_blocks[cert.chain_blocks.len() - 1];
    for (t, n) in c.testers().iter().zip(noise.testers()) {
        let probe = t.probe().scale(1.0).add_scaled(n.probe(), r).unwrap().scale(1.0 / (1.0 + r));
        let parent = theta1.scale(1.0 / cert.scale);
        assert!(probe.frobenius_distance(&parent).unwrap() < 1e-6);
    }
    for n in noise.testers() {
        assert!(n.effects().iter().all(|e| e.min_eigenvalue() > -1e-7));
    }
    assert!(matches!(
        reconstruct_noise_testers(&c, &RobustnessCertificate { value: 0.0, ..cert }),
        Err(Error::DegenerateRobustness(_))
    ));
}

#[test]
fn weight_decreases_along_white_noise() {
    let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Projective, 3).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..=10 {
        let eps = i as f64 / 10.0;
        let w = convex_weight(&with_white_noise(&c, 1.0 - eps).unwrap()).unwrap().value;
        assert!(w <= last + 1e-6, "eps {eps}: {w} > {last}");
        last = w;
    }
    assert!(last < 1e-6);
}

#[test]
fn certificates_are_consistent() {
    for seed in 0..4 {
        let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, seed).unwrap();
        let r = robustness(&c).unwrap();
        assert!(r.gap <= GAP && r.complementary_slackness <= 1e-6 && r.equality_residual <= 1e-7);
        assert!((r.dual_objective_check - 1.0 - r.value).abs() < 1e-6);
        assert!(r.parent_blocks.iter().all(|q| q.min_eigenvalue() > -1e-8));
        assert!(r.dual_effects.iter().flatten().all(|w| w.min_eigenvalue() > -1e-8));
        let w = convex_weight(&c).unwrap();
        assert!(w.gap <= GAP && w.complementary_slackness <= 1e-6);
        assert!((w.dual_objective_check - 1.0 + w.value).abs() < 1e-6);
        for alpha in 0..c.len() {
            for a in 0..c.outcomes() {
                let slack = c.effect(a, alpha).sub(&w.free_part[alpha][a]).unwrap();
                assert!(slack.min_eigenvalue() > -1e-8);
            }
        }
    }
}

#[test]
fn slater_points_for_each_family() {
    let c = random_collection(&NetworkShape::qubits(2), 2, 2, PovmKind::Generic, 8).unwrap();
    assert!(robustness_slater_check(&c).unwrap().is_strict(1e-9));
    assert!(weight_slater_check(&c).unwrap().is_strict(1e-9));
}

#[test]
fn deterministic_relabeling_keeps_compatibility() {
    let (c, _) = compatible_collection(&NetworkShape::qubits(1), 2, 2, 3, 4).unwrap();
    let swap = PostProcessing::deterministic(&[1, 0], 2).unwrap();
    let sim = Simulation {
        shared: vec![1.0],
        choice: vec![PostProcessing::identity(2)],
        relabel: vec![vec![swap.clone(), swap]],
    };
    let out = simulate_collection(&c, &sim).unwrap();
    assert!(is_compatible_collection(&out).is_compatible());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn faithfulness(seed in 0u64..1_000, compatible in any::<bool>()) {
        let c = if compatible {
            compatible_collection(&NetworkShape::qubits(1), 2, 2, 3, seed).unwrap().0
        } else {
            random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Projective, seed).unwrap()
        };
        let v = is_compatible_collection(&c).is_compatible();
        prop_assert_eq!(v, compatible);
        prop_assert_eq!(robustness(&c).unwrap().value <= 1e-6, v);
        prop_assert_eq!(convex_weight(&c).unwrap().value <= 1e-6, v);
    }

    #[test]
    fn simulation_does_not_increase_resources(seed in 0u64..1_000) {
        let c = random_collection(&NetworkShape::probe_trivial(1, 2), 2, 2, PovmKind::Projective, seed).unwrap();
        let sim = random_simulation(2, 2, 2, 2, 2, seed + 7);
        let out = simulate_collection(&c, &sim).unwrap();
        prop_assert!(robustness(&out).unwrap().value <= robustness(&c).unwrap().value + 1e-6);
        prop_assert!(convex_weight(&out).unwrap().value <= convex_weight(&c).unwrap().value + 1e-6);
    }

    #[test]
    fn local_unitaries_leave_resources_unchanged(seed in 0u64..1_000) {
        let c = random_collection(&NetworkShape::qubits(1), 2, 2, PovmKind::Generic, seed).unwrap();
        let u = local_unitary(&c, seed + 1);
        let cu = c.conjugated(&u).unwrap();
        prop_assert!((robustness(&c).unwrap().value - robustness(&cu).unwrap().value).abs() < 1e-7);
        prop_assert!((convex_weight(&c).unwrap().value - convex_weight(&cu).unwrap().value).abs() < 1e-7);
    }
}

#[test]
fn stalled_phase_one_is_repaired_into_a_verdict() {
    // This instance stalls the phase-one solver just short of its tolerance.
    let seed = combforge::sampling::derive_seed(4, 15);
    let (c, _) = compatible_collection(&NetworkShape::qubits(1), 3, 3, 3, seed).unwrap();
    match is_compatible_collection(&c) {
        Compatibility::Compatible { margin, .. } => assert!(margin.unwrap() > 1e-7),
        other => panic!("expected compatible, got {other:?}"),
    }
}

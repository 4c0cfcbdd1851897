use combforge::conic::*;
use combforge::sampling::{complex_gaussian, rng_from_seed};
use combforge::tensor::{HermitianOperator, Systems};
use proptest::prelude::*;

fn random_hermitian(seed: u64, s: Systems) -> HermitianOperator {
    let d = s.total_dim();
    let g = complex_gaussian(&mut rng_from_seed(seed), d, d);
    HermitianOperator::new(s, (&g + g.adjoint()).scale(0.5)).unwrap()
}

fn max_slackness(p: &SdpProblem, sol: &SdpSolution) -> f64 {
    complementary_slackness(p, sol).unwrap().into_iter().flatten().fold(0.0, f64::max)
}

#[test]
fn real_scalar_blocks_solve_linear_programs() {
    // max x + 2y s.t. x + y <= 1, x, y >= 0.
    let mut p = SdpProblem::new(Sense::Maximize);
    let x = p.add_block("x", Systems::empty(), BlockKind::Real);
    let y = p.add_block("y", Systems::empty(), BlockKind::Real);
    p.add_lmi("budget", vec![Term::whole(x, -1.0), Term::whole(y, -1.0)], HermitianOperator::scalar(-1.0));
    p.add_objective(x, HermitianOperator::scalar(1.0)).unwrap();
    p.add_objective(y, HermitianOperator::scalar(2.0)).unwrap();
    let sol = solve_sdp(&p).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal_value - 2.0).abs() < 1e-7);
    assert!((sol.blocks[y].trace() - 1.0).abs() < 1e-6);
}

#[test]
fn channel_optimization_reaches_the_dual_value() {
    // max ⟨A, J⟩ over Choi operators with Tr_1 J = 1_0.
    let s = Systems::from_dims(&[2, 2]).unwrap();
    let a = random_hermitian(4, s.clone());
    let mut p = SdpProblem::new(Sense::Maximize);
    let j = p.add_block("J", s, BlockKind::Hermitian);
    p.add_equality(
        "channel",
        vec![Term::new(j, 1.0, vec![1])],
        HermitianOperator::identity(Systems::from_dims(&[2]).unwrap()),
    );
    p.add_objective(j, a.clone()).unwrap();
    let sol = solve_sdp(&p).unwrap();
    assert!(sol.is_optimal());
    assert!(sol.gap < 1e-8);
    assert!((sol.blocks[j].inner(&a).unwrap() - sol.primal_value).abs() < 1e-7);
    assert!(max_slackness(&p, &sol) < 1e-6);
    // Any unitary channel is feasible and cannot beat the optimum.
    let id = combforge::comb::identity_channel(
        combforge::tensor::System::new(0, 2),
        combforge::tensor::System::new(1, 2),
    )
    .unwrap();
    assert!(id.inner(&a).unwrap() <= sol.primal_value + 1e-8);
}

#[test]
fn contradictory_constraints_are_infeasible() {
    let s = Systems::from_dims(&[2]).unwrap();
    let mut p = SdpProblem::new(Sense::Minimize);
    let x = p.add_block("X", s.clone(), BlockKind::Real);
    p.add_lmi("upper", vec![Term::whole(x, -1.0)], HermitianOperator::identity(s.clone()).scale(-0.2));
    p.add_lmi("lower", vec![Term::whole(x, 1.0)], HermitianOperator::identity(s));
    match check_feasibility(&p).unwrap() {
        Feasibility::Infeasible { margin, .. } => assert!(margin < -FEASIBILITY_MARGIN),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn slater_points_are_detected() {
    let s = Systems::from_dims(&[2]).unwrap();
    let mut p = SdpProblem::new(Sense::Minimize);
    let x = p.add_block("X", s.clone(), BlockKind::Hermitian);
    p.add_equality("trace", vec![Term::new(x, 1.0, vec![0])], HermitianOperator::scalar(1.0));
    p.add_objective(x, HermitianOperator::from_real_diagonal(s.clone(), &[1.0, 2.0]).unwrap()).unwrap();
    let half = HermitianOperator::identity(s.clone()).scale(0.5);
    // Multiplier y = 0 leaves the dual slack equal to the objective, which is positive definite.
    let strict = check_slater_point(&p, std::slice::from_ref(&half), &[HermitianOperator::scalar(0.0)]).unwrap();
    assert!(strict.is_strict(1e-9));
    let boundary = HermitianOperator::from_real_diagonal(s, &[1.0, 0.0]).unwrap();
    let report = check_slater_point(&p, &[boundary], &[HermitianOperator::scalar(0.0)]).unwrap();
    assert!(!report.is_strict(1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn trace_above_a_matrix_is_its_positive_part(seed in any::<u64>(), d in 2usize..=4) {
        let s = Systems::from_dims(&[d]).unwrap();
        let a = random_hermitian(seed, s.clone());
        let mut p = SdpProblem::new(Sense::Minimize);
        let x = p.add_block("X", s.clone(), BlockKind::Hermitian);
        p.add_lmi("above", vec![Term::whole(x, 1.0)], a.clone());
        p.add_objective(x, HermitianOperator::identity(s)).unwrap();
        let sol = solve_sdp(&p).unwrap();
        let expect: f64 = a.eigh().0.iter().filter(|&&l| l > 0.0).sum();
        prop_assert!(sol.is_optimal());
        prop_assert!((sol.primal_value - expect).abs() < 1e-6, "{} vs {}", sol.primal_value, expect);
        prop_assert!((sol.dual_value - expect).abs() < 1e-6);
        prop_assert!(max_slackness(&p, &sol) < 1e-6);
    }

    #[test]
    fn state_optimization_finds_the_top_eigenvalue(seed in any::<u64>(), d in 2usize..=4) {
        let s = Systems::from_dims(&[d]).unwrap();
        let a = random_hermitian(seed, s.clone());
        let mut p = SdpProblem::new(Sense::Maximize);
        let x = p.add_block("rho", s, BlockKind::Hermitian);
        p.add_equality("trace", vec![Term::new(x, 1.0, vec![0])], HermitianOperator::scalar(1.0));
        p.add_objective(x, a.clone()).unwrap();
        let sol = solve_sdp(&p).unwrap();
        prop_assert!((sol.primal_value - a.max_eigenvalue()).abs() < 1e-6);
        prop_assert!(sol.blocks[x].min_eigenvalue() > -1e-7);
    }
}

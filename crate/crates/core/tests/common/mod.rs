//! Oracles shared by the integration tests: exhaustive strategy enumeration
//! and POVM-level programs written independently of the tester machinery.
#![allow(dead_code)]

use combforge::comb::EnsembleCollection;
use combforge::conic::{solve_sdp, BlockKind, SdpProblem, SdpStatus, Sense, Term};
use combforge::tensor::{HermitianOperator, System, Systems};
use combforge::tester::TesterCollection;

/// Guessing probability by enumerating every deterministic strategy: one
/// tester index per ensemble and one guess per (ensemble, outcome).
/// Returns `None` when there are more than `limit` strategies.
pub fn brute_force_qcd(games: &EnsembleCollection, testers: &TesterCollection, limit: usize) -> Option<f64> {
    let s = games.len();
    let m = testers.len();
    let o = testers.outcomes();
    let k = games.combs_per_ensemble();
    let choices = m.checked_pow(s as u32)?;
    let guesses = k.checked_pow((o * s) as u32)?;
    if choices.checked_mul(guesses)? > limit {
        return None;
    }
    let mut best = f64::NEG_INFINITY;
    for c in 0..choices {
        let alpha: Vec<usize> = (0..s).map(|beta| (c / m.pow(beta as u32)) % m).collect();
        for g in 0..guesses {
            let mut total = 0.0;
            for (beta, &tester) in alpha.iter().enumerate() {
                for a in 0..o {
                    let b = (g / k.pow((beta * o + a) as u32)) % k;
                    let p = testers.effect(a, tester).inner(games.comb(b, beta).choi()).unwrap();
                    total += games.joint_weight(b, beta) * p;
                }
            }
            best = best.max(total);
        }
    }
    Some(best)
}

/// POVM elements of a probe-trivial collection, indexed `[α][a]`, with the
/// trivial input systems dropped.
pub fn povms(c: &TesterCollection) -> (Systems, Vec<Vec<HermitianOperator>>) {
    assert!(c.signature().is_probe_trivial());
    let d = c.signature().total_dim();
    let sys = Systems::new([System::new(0, d)]).unwrap();
    let elems = c
        .testers()
        .iter()
        .map(|t| {
            t.effects()
                .iter()
                .map(|e| HermitianOperator::new(sys.clone(), e.matrix().clone()).unwrap())
                .collect()
        })
        .collect();
    (sys, elems)
}

fn joint_blocks(p: &mut SdpProblem, sys: &Systems, m: usize, o: usize) -> Vec<(Vec<usize>, usize)> {
    let n = o.pow(m as u32);
    (0..n)
        .map(|idx| {
            let v: Vec<usize> = (0..m).map(|alpha| (idx / o.pow(alpha as u32)) % o).collect();
            let b = p.add_block(format!("G{idx}"), sys.clone(), BlockKind::Hermitian);
            (v, b)
        })
        .collect()
}

/// Generalized robustness of joint measurability:
/// `min s` with `Σ_{v_α = a} G_v ⪰ M_{a|α}` and `Σ_v G_v = s 1`.
pub fn povm_robustness(c: &TesterCollection) -> f64 {
    let (sys, m) = povms(c);
    let o = c.outcomes();
    let mut p = SdpProblem::new(Sense::Minimize);
    let joint = joint_blocks(&mut p, &sys, m.len(), o);
    let s = p.add_block("s", Systems::empty(), BlockKind::Real);
    let mut sum: Vec<Term> = joint.iter().map(|(_, b)| Term::whole(*b, 1.0)).collect();
    sum.push(Term::whole(s, -1.0));
    p.add_equality("sum", sum, HermitianOperator::zeros(sys.clone()));
    for (alpha, row) in m.iter().enumerate() {
        for (a, e) in row.iter().enumerate() {
            let terms = joint.iter().filter(|(v, _)| v[alpha] == a).map(|(_, b)| Term::whole(*b, 1.0)).collect();
            p.add_lmi("cover", terms, e.clone());
        }
    }
    p.add_objective(s, HermitianOperator::scalar(1.0)).unwrap();
    let sol = solve_sdp(&p).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    (sol.primal_value - 1.0).max(0.0)
}

/// Convex weight of incompatibility at the POVM level:
/// `1 - max (1/(m d)) Σ Tr Q_{a|α}` over `Q_{a|α} ⪯ M_{a|α}` with
/// `Q_{a|α} = Σ_{v_α = a} G_v` and `Σ_v G_v = γ 1`.
pub fn povm_weight(c: &TesterCollection) -> f64 {
    let (sys, m) = povms(c);
    let o = c.outcomes();
    let d = sys.total_dim() as f64;
    let mut p = SdpProblem::new(Sense::Maximize);
    let joint = joint_blocks(&mut p, &sys, m.len(), o);
    let gamma = p.add_block("gamma", Systems::empty(), BlockKind::Real);
    let mut sum: Vec<Term> = joint.iter().map(|(_, b)| Term::whole(*b, 1.0)).collect();
    sum.push(Term::whole(gamma, -1.0));
    p.add_equality("sum", sum, HermitianOperator::zeros(sys.clone()));
    for (alpha, row) in m.iter().enumerate() {
        for (a, e) in row.iter().enumerate() {
            let terms = joint.iter().filter(|(v, _)| v[alpha] == a).map(|(_, b)| Term::whole(*b, -1.0)).collect();
            p.add_lmi("below", terms, e.scale(-1.0));
        }
    }
    // Each G_v appears once per tester, so Σ_{a,α} Tr Q = m Σ_v Tr G_v.
    for (_, b) in &joint {
        p.add_objective(*b, HermitianOperator::identity(sys.clone()).scale(1.0 / d)).unwrap();
    }
    let sol = solve_sdp(&p).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    (1.0 - sol.primal_value).clamp(0.0, 1.0)
}

/// `(1 - eps) C + eps P` where `P` keeps every lower causality level of `C`
/// but makes its last input signal nothing: `P = C^(n-1) ⊗ d |0⟩⟨0|_in ⊗ 1_out / d_out`.
/// Only the top level is violated (the last input must have dimension > 1).
pub fn top_level_violation(c: &combforge::comb::QuantumComb, eps: f64) -> HermitianOperator {
    let n = c.slots();
    let sig = c.signature();
    let (din, dout) = (sig.dim(2 * n), sig.dim(2 * n + 1));
    let mut diag = vec![0.0; din * dout];
    diag[..dout].fill(din as f64 / dout as f64);
    let q = HermitianOperator::from_real_diagonal(
        Systems::new([System::new(2 * n, din), System::new(2 * n + 1, dout)]).unwrap(),
        &diag,
    )
    .unwrap();
    let p = if n == 0 { q } else { c.chain()[0].kron_compose(&q).unwrap() };
    c.choi().scale(1.0 - eps).add_scaled(&p, eps).unwrap()
}

/// Effects of `t` with `eps |ψ⟩⟨ψ|` added to the first one, `ψ` the first
/// computational basis vector.
pub fn perturbed_effects(t: &combforge::tester::QuantumTester, eps: f64) -> Vec<HermitianOperator> {
    let mut effects = t.effects().to_vec();
    let s = effects[0].systems().clone();
    let mut diag = vec![0.0; s.total_dim()];
    diag[0] = 1.0;
    let bump = HermitianOperator::from_real_diagonal(s, &diag).unwrap();
    effects[0] = effects[0].add_scaled(&bump, eps).unwrap();
    effects
}

//! Discrimination and exclusion games over comb ensembles, witness ensembles
//! built from dual certificates, and numerical checks of the two advantage
//! theorems.

use rayon::prelude::*;
use serde::Serialize;

use crate::comb::{uniform_comb, unvalidated_comb, CombEnsemble, CombResiduals, EnsembleCollection};
use crate::conic::{solve_sdp, SdpProblem, SdpStatus, Sense, SlaterReport};
use crate::error::{Error, Result};
use crate::incompat::{
    convex_weight_with_cap, deterministic_vectors, normalized_parent_slater_check, robustness_with_cap,
    tester_skeleton, ParentLayout, RobustnessCertificate, WeightCertificate, DEFAULT_VECTOR_CAP, ZERO_RESOURCE_TOL,
};
use crate::instances::random_ensembles;
use crate::sampling::derive_seed;
use crate::signature::CombSignature;
use crate::tensor::{sum_operators, HermitianOperator};
use crate::tester::TesterCollection;

/// Default cap on the number of guess vectors `k^s`.
pub const DEFAULT_GUESS_CAP: usize = 81;
/// Tolerance on theorem ratios.
pub const RATIO_TOL: f64 = 1e-4;
/// Duals whose total trace falls below this cannot be normalized.
pub const ZERO_DUAL_TOL: f64 = 1e-12;

/// How the exclusion game is scored.
pub const EXCLUSION_CONVENTION: &str =
    "exclusion error counts naming the comb that was actually sent (outcome a paired with comb b = a); \
     tester beta is used for ensemble beta";

fn check_pairing(games: &EnsembleCollection, testers: &TesterCollection) -> Result<()> {
    let cs = games.signature();
    let ts = testers.signature();
    if cs.dims() != ts.dims() || cs.slots() + 1 != ts.slots() {
        return Err(Error::SignatureMismatch(format!(
            "ensembles on dims {:?} cannot be probed by testers on dims {:?}",
            cs.dims(),
            ts.dims()
        )));
    }
    Ok(())
}

/// `w(b, β) Tr[C_{b|β} T_{a|α}]` indexed `[β][α][a][b]`.
fn joint_table(games: &EnsembleCollection, testers: &TesterCollection) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    check_pairing(games, testers)?;
    (0..games.len())
        .map(|beta| {
            (0..testers.len())
                .map(|alpha| {
                    (0..testers.outcomes())
                        .map(|a| {
                            (0..games.ensembles()[beta].len())
                                .map(|b| {
                                    let p = games.comb(b, beta).choi().inner(testers.effect(a, alpha))?;
                                    Ok(games.joint_weight(b, beta) * p)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Optimal deterministic strategy: which tester to use for each announced
/// ensemble and which comb to guess for each outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QcdStrategy {
    /// `tester[β]`.
    pub tester: Vec<usize>,
    /// `guess[β][a]`.
    pub guess: Vec<Vec<usize>>,
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Guessing probability with the collection used as given, and the strategy
/// attaining it. Ties go to the lowest index.
pub fn qcd_strategy(games: &EnsembleCollection, testers: &TesterCollection) -> Result<(f64, QcdStrategy)> {
    let table = joint_table(games, testers)?;
    let mut value = 0.0;
    let mut strategy = QcdStrategy {
        tester: Vec::new(),
        guess: Vec::new(),
    };
    for per_beta in &table {
        let scored: Vec<(f64, Vec<usize>)> = per_beta
            .iter()
            .map(|per_alpha| {
                let mut total = 0.0;
                let guesses = per_alpha
                    .iter()
                    .map(|row| {
                        let (b, v) = argmax(row.iter().copied());
                        total += v;
                        b
                    })
                    .collect();
                (total, guesses)
            })
            .collect();
        let (alpha, best) = argmax(scored.iter().map(|s| s.0));
        value += best;
        strategy.tester.push(alpha);
        strategy.guess.push(scored[alpha].1.clone());
    }
    Ok((value, strategy))
}

pub fn qcd_value_incompatible(games: &EnsembleCollection, testers: &TesterCollection) -> Result<f64> {
    Ok(qcd_strategy(games, testers)?.0)
}

/// Optimum of a game over compatible collections, realized as one tester
/// whose outcomes are vectors with one entry per ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibleOptimum {
    pub value: f64,
    pub gap: f64,
    pub vectors: Vec<Vec<usize>>,
    pub parent: Vec<HermitianOperator>,
}

/// Parent-tester program with objective `Σ_v Tr[G_v Σ_β w(v_β, β) C_{v_β|β}]`.
fn vector_game_problem(games: &EnsembleCollection, sense: Sense, cap: usize) -> Result<(SdpProblem, ParentLayout)> {
    let k = games.combs_per_ensemble();
    let vectors = deterministic_vectors(k, games.len(), cap, "guess vectors")?;
    let sig = games.signature().dual();
    let mut p = SdpProblem::new(sense);
    let layout = tester_skeleton(&mut p, &sig, vectors, "Q", true);
    for (v, &block) in layout.vectors.iter().zip(&layout.parents) {
        let terms: Vec<HermitianOperator> = v
            .iter()
            .enumerate()
            .map(|(beta, &b)| games.comb(b, beta).choi().scale(games.joint_weight(b, beta)))
            .collect();
        p.add_objective(block, sum_operators(&terms)?)?;
    }
    Ok((p, layout))
}

fn solve_vector_game(games: &EnsembleCollection, sense: Sense, cap: usize, what: &str) -> Result<CompatibleOptimum> {
    let (p, layout) = vector_game_problem(games, sense, cap)?;
    let sol = solve_sdp(&p)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "{what}: status {:?} after {} iterations (gap {:.3e})",
            sol.status, sol.iterations, sol.gap
        )));
    }
    Ok(CompatibleOptimum {
        value: sol.primal_value,
        gap: sol.gap,
        parent: layout.parents.iter().map(|&b| sol.blocks[b].clone()).collect(),
        vectors: layout.vectors,
    })
}

pub fn qcd_compatible_optimum(games: &EnsembleCollection, cap: usize) -> Result<CompatibleOptimum> {
    solve_vector_game(games, Sense::Maximize, cap, "compatible guessing")
}

/// Best guessing probability over all compatible collections.
pub fn qcd_value_compatible(games: &EnsembleCollection) -> Result<f64> {
    Ok(qcd_compatible_optimum(games, DEFAULT_GUESS_CAP)?.value)
}

/// Exclusion error `Σ_β Σ_b w(b, β) Tr[T_{b|β} C_{b|β}]` with tester `β`
/// used for ensemble `β`.
pub fn exclusion_value(games: &EnsembleCollection, testers: &TesterCollection) -> Result<f64> {
    check_exclusion_shape(games, testers)?;
    let table = joint_table(games, testers)?;
    Ok((0..games.len())
        .map(|beta| (0..testers.outcomes()).map(|b| table[beta][beta][b][b]).sum::<f64>())
        .sum())
}

/// Exploration mode: the player may pick the best tester for each ensemble.
pub fn exclusion_value_relaxed(games: &EnsembleCollection, testers: &TesterCollection) -> Result<f64> {
    if games.combs_per_ensemble() != testers.outcomes() {
        return Err(Error::SignatureMismatch(format!(
            "{} combs per ensemble but {} outcomes per tester",
            games.combs_per_ensemble(),
            testers.outcomes()
        )));
    }
    let table = joint_table(games, testers)?;
    Ok(table
        .iter()
        .map(|per_beta| {
            per_beta
                .iter()
                .map(|per_alpha| (0..per_alpha.len()).map(|b| per_alpha[b][b]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum())
}

fn check_exclusion_shape(games: &EnsembleCollection, testers: &TesterCollection) -> Result<()> {
    if games.len() != testers.len() || games.combs_per_ensemble() != testers.outcomes() {
        return Err(Error::SignatureMismatch(format!(
            "exclusion pairs ensemble β with tester β and comb b with outcome b: {} ensembles of {} combs vs {} testers with {} outcomes",
            games.len(),
            games.combs_per_ensemble(),
            testers.len(),
            testers.outcomes()
        )));
    }
    Ok(())
}

pub fn exclusion_compatible_optimum(games: &EnsembleCollection, cap: usize) -> Result<CompatibleOptimum> {
    solve_vector_game(games, Sense::Minimize, cap, "compatible exclusion")
}

/// Smallest exclusion error over all compatible collections.
pub fn exclusion_value_compatible(games: &EnsembleCollection) -> Result<f64> {
    Ok(exclusion_compatible_optimum(games, DEFAULT_VECTOR_CAP)?.value)
}

/// Strictly feasible points of the compatible-scenario program.
pub fn vector_game_slater_check(games: &EnsembleCollection, sense: Sense, cap: usize) -> Result<SlaterReport> {
    let (p, layout) = vector_game_problem(games, sense, cap)?;
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let top = layout
        .parents
        .iter()
        .filter_map(|&b| p.objective[b].as_ref())
        .map(|c| c.scale(sign).max_eigenvalue())
        .fold(0.0, f64::max)
        + 1.0;
    normalized_parent_slater_check(&p, &games.signature().dual(), &layout, top)
}

/// Ensemble collection built from normalized dual operators, one ensemble per
/// tester and one comb per outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessEnsemble {
    pub ensembles: EnsembleCollection,
    /// `q(a, α) = Tr X_{aα} / Σ Tr X`, indexed `[α][a]`.
    pub weights: Vec<Vec<f64>>,
    /// `Σ Tr X / D`, with `D` the product of output dimensions.
    pub scale: f64,
    /// Whether every weighted operator passed comb validation.
    pub witness_valid: bool,
    /// Comb residuals indexed `[α][a]`; `None` where the weight vanished.
    pub residuals: Vec<Vec<Option<CombResiduals>>>,
}

/// Normalizes PSD duals `X_{aα}` into combs `C_{a|α} = X_{aα} · d_in / Tr X_{aα}`,
/// with `d_in` the product of input dimensions, weighted by `q(a, α)`.
pub fn witness_ensemble(duals: &[Vec<HermitianOperator>], tester_sig: &CombSignature) -> Result<WitnessEnsemble> {
    let total: f64 = duals.iter().flatten().map(HermitianOperator::trace).sum();
    if total.is_nan() || total <= ZERO_DUAL_TOL {
        return Err(Error::ZeroDual);
    }
    let comb_sig = tester_sig.dual();
    let slots = comb_sig.slots();
    let d_in = comb_sig.input_product() as f64;
    let cutoff = ZERO_DUAL_TOL * total;
    let weights: Vec<Vec<f64>> = duals
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| {
                    let t = x.trace();
                    if t > cutoff {
                        t / total
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let kept: f64 = weights.iter().flatten().sum();
    let mut witness_valid = true;
    let mut residuals = Vec::with_capacity(duals.len());
    let mut ensembles = Vec::with_capacity(duals.len());
    let mut outer = Vec::with_capacity(duals.len());
    for (row, qs) in duals.iter().zip(&weights) {
        let w_beta: f64 = qs.iter().sum();
        let mut combs = Vec::with_capacity(row.len());
        let mut res_row = Vec::with_capacity(row.len());
        for (x, &q) in row.iter().zip(qs) {
            if q > 0.0 {
                let (comb, res) = unvalidated_comb(&x.scale(d_in / x.trace()), slots)?;
                witness_valid &= res.is_valid();
                combs.push(comb);
                res_row.push(Some(res));
            } else {
                combs.push(uniform_comb(&comb_sig));
                res_row.push(None);
            }
        }
        let conditional: Vec<f64> = if w_beta > 0.0 {
            qs.iter().map(|q| q / w_beta).collect()
        } else {
            vec![1.0 / row.len() as f64; row.len()]
        };
        ensembles.push(CombEnsemble::new(combs, renormalize(conditional))?);
        outer.push(w_beta / kept);
        residuals.push(res_row);
    }
    Ok(WitnessEnsemble {
        ensembles: EnsembleCollection::new(ensembles, renormalize(outer))?,
        weights,
        scale: total / tester_sig.output_product() as f64,
        witness_valid,
        residuals,
    })
}

/// Removes rounding drift so the weights pass the distribution check.
fn renormalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

pub fn ensemble_from_robustness_dual(cert: &RobustnessCertificate, tester_sig: &CombSignature) -> Result<WitnessEnsemble> {
    if cert.value <= ZERO_RESOURCE_TOL {
        return Err(Error::DegenerateRobustness(cert.value));
    }
    witness_ensemble(&cert.dual_effects, tester_sig)
}

pub fn ensemble_from_weight_dual(cert: &WeightCertificate, tester_sig: &CombSignature) -> Result<WitnessEnsemble> {
    witness_ensemble(&cert.witness, tester_sig)
}

/// Settings for theorem verification runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub random_ensembles: usize,
    pub seed: u64,
    pub vector_cap: usize,
    pub guess_cap: usize,
    /// Memory dimension of the random combs.
    pub memory_dim: usize,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            random_ensembles: 20,
            seed: 0,
            vector_cap: DEFAULT_VECTOR_CAP,
            guess_cap: DEFAULT_GUESS_CAP,
            memory_dim: 2,
            tolerance: RATIO_TOL,
        }
    }
}

/// Both game values on one ensemble collection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameComparison {
    /// Value with the collection as given.
    pub incompatible_value: f64,
    /// Optimum over compatible collections.
    pub compatible_value: f64,
    /// `None` when the compatible value vanishes.
    pub ratio: Option<f64>,
}

impl GameComparison {
    fn new(incompatible_value: f64, compatible_value: f64) -> Self {
        let ratio = (compatible_value.abs() > 1e-12).then(|| incompatible_value / compatible_value);
        Self {
            incompatible_value,
            compatible_value,
            ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessEvaluation {
    #[serde(flatten)]
    pub values: GameComparison,
    pub witness_valid: bool,
    /// Whether the ratio matches the prediction within tolerance.
    pub matches_prediction: bool,
    pub weights: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<Option<CombResiduals>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub seed: u64,
    #[serde(flatten)]
    pub values: GameComparison,
    pub holds: bool,
}

/// Outcome of a theorem verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameReport {
    pub theorem: u8,
    /// `R` for the discrimination theorem, `W` for the exclusion theorem.
    pub resource: f64,
    /// `1 + R` or `1 - W`.
    pub predicted_ratio: f64,
    pub certificate_gap: f64,
    /// Absent when the resource vanishes and no witness is needed.
    pub witness: Option<WitnessEvaluation>,
    pub bound_checks: Vec<BoundCheck>,
    pub violations: usize,
    pub diagnostics: Vec<String>,
    /// The witness ensemble, when one was built.
    pub ensemble: Option<EnsembleCollection>,
}

fn bound_checks(
    testers: &TesterCollection,
    opts: &VerifyOptions,
    evaluate: impl Fn(&EnsembleCollection) -> Result<GameComparison> + Sync,
    holds: impl Fn(&GameComparison) -> bool + Sync,
) -> Result<Vec<BoundCheck>> {
    (0..opts.random_ensembles)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(opts.seed, i as u64);
            let games = random_ensembles(testers.signature(), testers.len(), testers.outcomes(), opts.memory_dim, seed)?;
            let values = evaluate(&games)?;
            Ok(BoundCheck {
                seed,
                holds: holds(&values),
                values,
            })
        })
        .collect()
}

/// Discrimination advantage: the witness ensemble attains `1 + R` and no
/// ensemble exceeds it.
pub fn verify_theorem1(testers: &TesterCollection, opts: &VerifyOptions) -> Result<GameReport> {
    let cert = robustness_with_cap(testers, opts.vector_cap)?;
    let predicted = 1.0 + cert.value;
    let evaluate = |games: &EnsembleCollection| -> Result<GameComparison> {
        Ok(GameComparison::new(
            qcd_value_incompatible(games, testers)?,
            qcd_compatible_optimum(games, opts.guess_cap)?.value,
        ))
    };
    let mut diagnostics = Vec::new();
    let (witness, ensemble) = if cert.value > ZERO_RESOURCE_TOL {
        let w = ensemble_from_robustness_dual(&cert, testers.signature())?;
        let values = evaluate(&w.ensembles)?;
        let matches_prediction = values.ratio.is_some_and(|r| (r - predicted).abs() <= opts.tolerance);
        if !w.witness_valid {
            diagnostics.push("witness operators violate the comb conditions; see residuals".into());
        }
        let eval = WitnessEvaluation {
            values,
            witness_valid: w.witness_valid,
            matches_prediction,
            weights: w.weights,
            residuals: w.residuals,
        };
        (Some(eval), Some(w.ensembles))
    } else {
        diagnostics.push("robustness vanishes; the collection is compatible and no witness is built".into());
        (None, None)
    };
    let checks = bound_checks(testers, opts, evaluate, |v| {
        v.ratio.is_some_and(|r| r <= predicted + opts.tolerance)
    })?;
    let violations = checks.iter().filter(|c| !c.holds).count();
    Ok(GameReport {
        theorem: 1,
        resource: cert.value,
        predicted_ratio: predicted,
        certificate_gap: cert.gap,
        witness,
        bound_checks: checks,
        violations,
        diagnostics,
        ensemble,
    })
}

/// Exclusion advantage: the witness ensemble attains `1 - W` and no ensemble
/// goes below it.
pub fn verify_theorem2(testers: &TesterCollection, opts: &VerifyOptions) -> Result<GameReport> {
    let cert = convex_weight_with_cap(testers, opts.vector_cap)?;
    let predicted = 1.0 - cert.value;
    let evaluate = |games: &EnsembleCollection| -> Result<GameComparison> {
        Ok(GameComparison::new(
            exclusion_value(games, testers)?,
            exclusion_compatible_optimum(games, opts.vector_cap)?.value,
        ))
    };
    let mut diagnostics = vec![EXCLUSION_CONVENTION.to_string()];
    let (witness, ensemble) = if cert.value > ZERO_RESOURCE_TOL {
        let w = ensemble_from_weight_dual(&cert, testers.signature())?;
        let values = evaluate(&w.ensembles)?;
        let matches_prediction = match values.ratio {
            Some(r) => (r - predicted).abs() <= opts.tolerance,
            None => predicted.abs() <= opts.tolerance && values.incompatible_value.abs() <= opts.tolerance,
        };
        if !w.witness_valid {
            diagnostics.push("witness operators violate the comb conditions; see residuals".into());
        }
        let eval = WitnessEvaluation {
            values,
            witness_valid: w.witness_valid,
            matches_prediction,
            weights: w.weights,
            residuals: w.residuals,
        };
        (Some(eval), Some(w.ensembles))
    } else {
        diagnostics.push("convex weight vanishes; the collection is compatible and no witness is built".into());
        (None, None)
    };
    let checks = bound_checks(testers, opts, evaluate, |v| match v.ratio {
        Some(r) => r >= predicted - opts.tolerance,
        None => true,
    })?;
    let violations = checks.iter().filter(|c| !c.holds).count();
    let above_one = checks.iter().filter(|c| c.values.ratio.is_some_and(|r| r > 1.0 + opts.tolerance)).count();
    if above_one > 0 {
        diagnostics.push(format!(
            "{above_one} random ensembles give the fixed collection a larger error than the best compatible collection"
        ));
    }
    Ok(GameReport {
        theorem: 2,
        resource: cert.value,
        predicted_ratio: predicted,
        certificate_gap: cert.gap,
        witness,
        bound_checks: checks,
        violations,
        diagnostics,
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::qubit_mub_collection;

    #[test]
    fn mub_witnesses_attain_the_predictions() {
        let c = qubit_mub_collection(2, 1).unwrap();
        let opts = VerifyOptions {
            random_ensembles: 4,
            ..VerifyOptions::default()
        };
        let r1 = verify_theorem1(&c, &opts).unwrap();
        let w1 = r1.witness.as_ref().unwrap();
        assert!(w1.witness_valid);
        assert!(w1.matches_prediction, "{r1:#?}");
        assert_eq!(r1.violations, 0);
        let r2 = verify_theorem2(&c, &opts).unwrap();
        let w2 = r2.witness.as_ref().unwrap();
        assert!(w2.matches_prediction, "{r2:#?}");
        assert_eq!(r2.violations, 0);
    }
}

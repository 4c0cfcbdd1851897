//! Tester compatibility, robustness of incompatibility, and convex weight,
//! each certified by a semidefinite program with dual witnesses.

use serde::Serialize;

use crate::comb::CHAIN_TOL;
use crate::conic::{
    check_feasibility, check_slater_point, complementary_slackness, solve_sdp, BlockKind, Feasibility,
    SdpProblem, SdpSolution, SdpStatus, Sense, SlaterReport, Term, FEASIBILITY_MARGIN,
};
use crate::error::{Error, Result};
use crate::signature::CombSignature;
use crate::tensor::{sum_operators, HermitianOperator, Systems};
use crate::tester::{validate_tester, TesterCollection};

/// Default cap on the number of deterministic vectors `o^m`.
pub const DEFAULT_VECTOR_CAP: usize = 64;
/// Values at or below this are treated as zero robustness or weight.
pub const ZERO_RESOURCE_TOL: f64 = 1e-6;
/// Largest accepted primal-dual gap for a certificate.
pub const CERTIFICATE_GAP_TOL: f64 = 1e-6;

/// All vectors in `[o]^m`, lexicographic with the first entry most significant.
pub fn deterministic_vectors(outcomes: usize, testers: usize, cap: usize, what: &'static str) -> Result<Vec<Vec<usize>>> {
    let count = u32::try_from(testers)
        .ok()
        .and_then(|m| outcomes.checked_pow(m))
        .unwrap_or(usize::MAX);
    if count > cap {
        return Err(Error::CapExceeded { what, needed: count, cap });
    }
    Ok((0..count)
        .map(|mut idx| {
            let mut v = vec![0; testers];
            for slot in v.iter_mut().rev() {
                *slot = idx % outcomes;
                idx /= outcomes;
            }
            v
        })
        .collect())
}

/// Systems `0..=last` of a signature.
pub(crate) fn prefix_systems(sig: &CombSignature, last: usize) -> Systems {
    sig.systems()
        .select(&(0..=last).collect::<Vec<_>>())
        .expect("prefix of the signature")
}

/// Block indices of a parent tester with vector outcomes inside a problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ParentLayout {
    pub vectors: Vec<Vec<usize>>,
    pub parents: Vec<usize>,
    /// `chain[k - 1]` is the block of `Θ^(k)`.
    pub chain: Vec<usize>,
    pub sum_equality: usize,
    /// Equalities tying `Θ^(k)` to `Θ^(k-1)`, for `k = n, ..., 2`.
    pub chain_equalities: Vec<usize>,
    /// `Tr Θ^(1) = 1`, when imposed.
    pub normalization: Option<usize>,
    /// LMI constraint of each `(α, a)`, when present.
    pub lmis: Vec<Vec<usize>>,
}

/// Adds parent blocks `G_v`, chain blocks `Θ^(k)` and the tester equalities
/// `Σ_v G_v = 1 ⊗ Θ^(n)`, `Tr_(2k-2) Θ^(k) = 1 ⊗ Θ^(k-1)`.
pub(crate) fn tester_skeleton(
    p: &mut SdpProblem,
    sig: &CombSignature,
    vectors: Vec<Vec<usize>>,
    name: &str,
    normalized: bool,
) -> ParentLayout {
    let n = sig.slots();
    let systems = sig.systems();
    let parents: Vec<usize> = vectors
        .iter()
        .map(|v| p.add_block(format!("{name}{v:?}"), systems.clone(), BlockKind::Hermitian))
        .collect();
    let chain: Vec<usize> = (1..=n)
        .map(|k| p.add_block(format!("Theta^({k})"), prefix_systems(sig, 2 * k - 2), BlockKind::Hermitian))
        .collect();
    let mut terms: Vec<Term> = parents.iter().map(|&b| Term::whole(b, 1.0)).collect();
    terms.push(Term::whole(chain[n - 1], -1.0));
    let sum_equality = p.add_equality("parent sum", terms, HermitianOperator::zeros(systems));
    let chain_equalities = (2..=n)
        .rev()
        .map(|k| {
            p.add_equality(
                format!("chain {k}"),
                vec![Term::new(chain[k - 1], 1.0, vec![2 * k - 2]), Term::whole(chain[k - 2], -1.0)],
                HermitianOperator::zeros(prefix_systems(sig, 2 * k - 3)),
            )
        })
        .collect();
    let normalization = normalized.then(|| {
        p.add_equality(
            "probe trace",
            vec![Term::new(chain[0], 1.0, vec![0])],
            HermitianOperator::scalar(1.0),
        )
    });
    ParentLayout {
        vectors,
        parents,
        chain,
        sum_equality,
        chain_equalities,
        normalization,
        lmis: Vec::new(),
    }
}

/// `Σ_{v : v_α = a} G_v` as constraint terms.
fn marginal_terms(layout: &ParentLayout, alpha: usize, a: usize, weight: f64) -> Vec<Term> {
    layout
        .vectors
        .iter()
        .zip(&layout.parents)
        .filter(|(v, _)| v[alpha] == a)
        .map(|(_, &b)| Term::whole(b, weight))
        .collect()
}

fn marginal(layout: &ParentLayout, blocks: &[HermitianOperator], alpha: usize, a: usize, systems: &Systems) -> HermitianOperator {
    layout
        .vectors
        .iter()
        .zip(&layout.parents)
        .filter(|(v, _)| v[alpha] == a)
        .fold(HermitianOperator::zeros(systems.clone()), |acc, (_, &b)| {
            acc.add(&blocks[b]).expect("parents share the tester systems")
        })
}

fn require_optimal(sol: &SdpSolution, what: &str) -> Result<()> {
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "{what}: status {:?} after {} iterations (gap {:.3e}, primal infeasibility {:.3e}, dual infeasibility {:.3e})",
            sol.status, sol.iterations, sol.gap, sol.primal_infeasibility, sol.dual_infeasibility
        )));
    }
    Ok(())
}

/// Optimal robustness program with its dual certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessCertificate {
    /// `R = max(0, s - 1)`.
    pub value: f64,
    /// Optimal `s = Tr Θ^(1)`.
    pub scale: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub vectors: Vec<Vec<usize>>,
    /// Optimal parents `Q_v`.
    pub parent_blocks: Vec<HermitianOperator>,
    /// `Θ^(n), ..., Θ^(1)`.
    pub chain_blocks: Vec<HermitianOperator>,
    /// LMI multipliers `ω_{aα}`, indexed `[α][a]`.
    pub dual_effects: Vec<Vec<HermitianOperator>>,
    /// `Σ_{a,α} Tr[ω_{aα} T_{a|α}]`, which equals `1 + R` at optimum.
    pub dual_objective_check: f64,
    /// Largest `|Tr[(Σ Q - T) ω]|`.
    pub complementary_slackness: f64,
    /// Largest Frobenius residual of `Σ Q - 1 ⊗ Θ^(n)` and the chain.
    pub equality_residual: f64,
    /// Noise testers, when `R` is large enough to reconstruct them.
    pub noise_testers: Option<TesterCollection>,
    /// Set when all reconstructed noise testers coincide.
    pub noise_members_coincide: bool,
    /// Why reconstruction was skipped or failed.
    pub noise_note: Option<String>,
}

/// Builds the reduced robustness program: minimize `Tr Θ^(1)` subject to
/// `Σ_{v_α = a} Q_v ⪰ T_{a|α}` and the tester chain on `{Q_v}`.
pub fn robustness_problem(collection: &TesterCollection, cap: usize) -> Result<(SdpProblem, ParentLayout)> {
    let vectors = deterministic_vectors(collection.outcomes(), collection.len(), cap, "robustness")?;
    let sig = collection.signature();
    let mut p = SdpProblem::new(Sense::Minimize);
    let mut layout = tester_skeleton(&mut p, sig, vectors, "Q", false);
    for alpha in 0..collection.len() {
        let row = (0..collection.outcomes())
            .map(|a| {
                p.add_lmi(
                    format!("cover {a}|{alpha}"),
                    marginal_terms(&layout, alpha, a, 1.0),
                    collection.effect(a, alpha).clone(),
                )
            })
            .collect();
        layout.lmis.push(row);
    }
    p.add_objective(layout.chain[0], HermitianOperator::identity(prefix_systems(sig, 0)))?;
    Ok((p, layout))
}

fn equality_residual(p: &SdpProblem, layout: &ParentLayout, blocks: &[HermitianOperator]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &c in std::iter::once(&layout.sum_equality).chain(&layout.chain_equalities) {
        let r = p.constraint_value(c, blocks)?.sub(&p.constraints[c].rhs)?;
        worst = worst.max(r.frobenius_norm());
    }
    Ok(worst)
}

fn max_slackness(p: &SdpProblem, sol: &SdpSolution) -> Result<f64> {
    Ok(complementary_slackness(p, sol)?
        .into_iter()
        .flatten()
        .fold(0.0, f64::max))
}

pub fn robustness(collection: &TesterCollection) -> Result<RobustnessCertificate> {
    robustness_with_cap(collection, DEFAULT_VECTOR_CAP)
}

pub fn robustness_with_cap(collection: &TesterCollection, cap: usize) -> Result<RobustnessCertificate> {
    let (p, layout) = robustness_problem(collection, cap)?;
    let sol = solve_sdp(&p)?;
    require_optimal(&sol, "robustness")?;
    let scale = sol.primal_value;
    let dual_effects: Vec<Vec<HermitianOperator>> = layout
        .lmis
        .iter()
        .map(|row| row.iter().map(|&c| sol.constraint_duals[c].clone()).collect())
        .collect();
    let mut dual_objective_check = 0.0;
    for (alpha, row) in dual_effects.iter().enumerate() {
        for (a, w) in row.iter().enumerate() {
            dual_objective_check += w.inner(collection.effect(a, alpha))?;
        }
    }
    let mut cert = RobustnessCertificate {
        value: (scale - 1.0).max(0.0),
        scale,
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        gap: sol.gap,
        parent_blocks: layout.parents.iter().map(|&b| sol.blocks[b].clone()).collect(),
        chain_blocks: layout.chain.iter().rev().map(|&b| sol.blocks[b].clone()).collect(),
        vectors: layout.vectors.clone(),
        dual_effects,
        dual_objective_check,
        complementary_slackness: max_slackness(&p, &sol)?,
        equality_residual: equality_residual(&p, &layout, &sol.blocks)?,
        noise_testers: None,
        noise_members_coincide: false,
        noise_note: None,
    };
    if cert.value > ZERO_RESOURCE_TOL {
        match reconstruct_noise_testers(collection, &cert) {
            Ok(noise) => {
                cert.noise_members_coincide = noise.testers().windows(2).all(|w| {
                    w[0].effects()
                        .iter()
                        .zip(w[1].effects())
                        .all(|(x, y)| x.frobenius_distance(y).is_ok_and(|d| d <= CHAIN_TOL))
                });
                cert.noise_testers = Some(noise);
            }
            Err(e) => cert.noise_note = Some(format!("noise testers failed validation: {e}")),
        }
    } else {
        cert.noise_note = Some("robustness is zero; no noise testers".into());
    }
    Ok(cert)
}

/// `N_{a|α} = (Σ_{v_α = a} Q_v - T_{a|α}) / R`, validated as testers.
pub fn reconstruct_noise_testers(
    collection: &TesterCollection,
    cert: &RobustnessCertificate,
) -> Result<TesterCollection> {
    let r = cert.value;
    if r <= ZERO_RESOURCE_TOL {
        return Err(Error::DegenerateRobustness(r));
    }
    let systems = collection.signature().systems();
    let layout = ParentLayout {
        vectors: cert.vectors.clone(),
        parents: (0..cert.parent_blocks.len()).collect(),
        chain: Vec::new(),
        sum_equality: 0,
        chain_equalities: Vec::new(),
        normalization: None,
        lmis: Vec::new(),
    };
    let testers = (0..collection.len())
        .map(|alpha| {
            let effects = (0..collection.outcomes())
                .map(|a| {
                    marginal(&layout, &cert.parent_blocks, alpha, a, &systems)
                        .sub(collection.effect(a, alpha))
                        .map(|d| d.scale(1.0 / r))
                })
                .collect::<Result<Vec<_>>>()?;
            validate_tester(&effects, collection.slots())
        })
        .collect::<Result<Vec<_>>>()?;
    TesterCollection::new(testers)
}

/// Model of a cone of "free" tester collections for the convex weight.
///
/// Implementations add their variables and constraints to the problem and
/// return, for each `(α, a)`, terms whose sum is the cone element `Q_{a|α}`.
pub trait FreeCone {
    fn model(&self, p: &mut SdpProblem, collection: &TesterCollection) -> Result<(Vec<Vec<Vec<Term>>>, ParentLayout)>;
}

/// The cone of (unnormalized) compatible collections, realized by a parent
/// with deterministic vector outcomes and a free-scale normalization chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompatibleCone {
    pub cap: usize,
}

impl Default for CompatibleCone {
    fn default() -> Self {
        Self { cap: DEFAULT_VECTOR_CAP }
    }
}

impl FreeCone for CompatibleCone {
    fn model(&self, p: &mut SdpProblem, collection: &TesterCollection) -> Result<(Vec<Vec<Vec<Term>>>, ParentLayout)> {
        let vectors = deterministic_vectors(collection.outcomes(), collection.len(), self.cap, "convex weight")?;
        let layout = tester_skeleton(p, collection.signature(), vectors, "G", false);
        let terms = (0..collection.len())
            .map(|alpha| {
                (0..collection.outcomes())
                    .map(|a| marginal_terms(&layout, alpha, a, 1.0))
                    .collect()
            })
            .collect();
        Ok((terms, layout))
    }
}

/// Optimal convex-weight program with its witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightCertificate {
    /// `W = 1 - optimum`, clamped to `[0, 1]`.
    pub value: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// `D = Tr Σ_a T_{a|α}`.
    pub normalization: f64,
    pub vectors: Vec<Vec<usize>>,
    pub parent_blocks: Vec<HermitianOperator>,
    /// `Θ^(n), ..., Θ^(1)` of the free part (free overall scale).
    pub chain_blocks: Vec<HermitianOperator>,
    /// Free part `Q_{a|α}`, indexed `[α][a]`.
    pub free_part: Vec<Vec<HermitianOperator>>,
    /// Witness `Y_{a|α}` from the LMI multipliers, indexed `[α][a]`.
    pub witness: Vec<Vec<HermitianOperator>>,
    /// `Σ Tr[Y_{a|α} T_{a|α}]`, which equals `1 - W` at optimum.
    pub dual_objective_check: f64,
    pub complementary_slackness: f64,
    pub equality_residual: f64,
}

/// Builds the weight program for a given free cone: maximize
/// `(1 / mD) Σ Tr Q_{a|α}` subject to `T_{a|α} - Q_{a|α} ⪰ 0`.
pub fn convex_weight_problem(
    collection: &TesterCollection,
    cone: &dyn FreeCone,
) -> Result<(SdpProblem, ParentLayout, f64)> {
    let mut p = SdpProblem::new(Sense::Maximize);
    let (terms, mut layout) = cone.model(&mut p, collection)?;
    let d = sum_operators(collection.testers()[0].effects())?.trace();
    let m = collection.len() as f64;
    for (alpha, row) in terms.iter().enumerate() {
        let mut lmis = Vec::new();
        for (a, ts) in row.iter().enumerate() {
            let neg: Vec<Term> = ts
                .iter()
                .map(|t| Term::new(t.block, -t.weight, t.traced.clone()))
                .collect();
            for t in ts {
                let blk = &p.blocks[t.block];
                let kept = blk.systems.without(&t.traced)?;
                let coef = HermitianOperator::identity(kept)
                    .embed_identity(&blk.systems)?
                    .scale(t.weight / (m * d));
                p.add_objective(t.block, coef)?;
            }
            lmis.push(p.add_lmi(format!("dominate {a}|{alpha}"), neg, collection.effect(a, alpha).scale(-1.0)));
        }
        layout.lmis.push(lmis);
    }
    Ok((p, layout, d))
}

pub fn convex_weight(collection: &TesterCollection) -> Result<WeightCertificate> {
    convex_weight_in(collection, &CompatibleCone::default())
}

pub fn convex_weight_with_cap(collection: &TesterCollection, cap: usize) -> Result<WeightCertificate> {
    convex_weight_in(collection, &CompatibleCone { cap })
}

pub fn convex_weight_in(collection: &TesterCollection, cone: &dyn FreeCone) -> Result<WeightCertificate> {
    let (p, layout, d) = convex_weight_problem(collection, cone)?;
    let sol = solve_sdp(&p)?;
    require_optimal(&sol, "convex weight")?;
    let systems = collection.signature().systems();
    let free_part = (0..collection.len())
        .map(|alpha| {
            (0..collection.outcomes())
                .map(|a| marginal(&layout, &sol.blocks, alpha, a, &systems))
                .collect()
        })
        .collect();
    let witness: Vec<Vec<HermitianOperator>> = layout
        .lmis
        .iter()
        .map(|row| row.iter().map(|&c| sol.constraint_duals[c].clone()).collect())
        .collect();
    let mut dual_objective_check = 0.0;
    for (alpha, row) in witness.iter().enumerate() {
        for (a, y) in row.iter().enumerate() {
            dual_objective_check += y.inner(collection.effect(a, alpha))?;
        }
    }
    Ok(WeightCertificate {
        value: (1.0 - sol.primal_value).clamp(0.0, 1.0),
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        gap: sol.gap,
        normalization: d,
        vectors: layout.vectors.clone(),
        parent_blocks: layout.parents.iter().map(|&b| sol.blocks[b].clone()).collect(),
        chain_blocks: layout.chain.iter().rev().map(|&b| sol.blocks[b].clone()).collect(),
        free_part,
        witness,
        dual_objective_check,
        complementary_slackness: max_slackness(&p, &sol)?,
        equality_residual: equality_residual(&p, &layout, &sol.blocks)?,
    })
}

/// Outcome of [`is_compatible_collection`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Compatibility {
    Compatible {
        /// Parent effects `G_v`, one per deterministic vector.
        parent: Vec<HermitianOperator>,
        /// Vector `v` assigns outcome `v[α]` to tester `α` (deterministic post-processing).
        vectors: Vec<Vec<usize>>,
        /// Phase-one margin, `None` when no program was needed.
        margin: Option<f64>,
        /// The parent sits on the boundary of the PSD cone (margin within tolerance of zero).
        on_boundary: bool,
    },
    Incompatible {
        reason: String,
        margin: Option<f64>,
    },
    Undecided {
        reason: String,
    },
}

impl Compatibility {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Self::Compatible { .. })
    }
}

pub fn is_compatible_collection(collection: &TesterCollection) -> Compatibility {
    is_compatible_collection_with_cap(collection, DEFAULT_VECTOR_CAP)
}

/// Two-stage decision: matching normalization chains, then a phase-one
/// feasibility program for a parent whose deterministic marginals reproduce
/// every effect.
pub fn is_compatible_collection_with_cap(collection: &TesterCollection, cap: usize) -> Compatibility {
    let first = &collection.testers()[0];
    for (alpha, t) in collection.testers().iter().enumerate().skip(1) {
        for (k, (x, y)) in first.chain().iter().zip(t.chain()).enumerate() {
            let d = x.frobenius_distance(y).unwrap_or(f64::INFINITY);
            if d > CHAIN_TOL {
                return Compatibility::Incompatible {
                    reason: format!(
                        "tester {alpha} has a different normalization Ξ^({}) (distance {d:.3e})",
                        first.slots() - k
                    ),
                    margin: None,
                };
            }
        }
    }
    let (m, o) = (collection.len(), collection.outcomes());
    if m == 1 || o == 1 {
        let vectors: Vec<Vec<usize>> = if m == 1 { (0..o).map(|a| vec![a]).collect() } else { vec![vec![0; m]] };
        let parent = if m == 1 {
            first.effects().to_vec()
        } else {
            vec![first.effects()[0].clone()]
        };
        return Compatibility::Compatible {
            parent,
            vectors,
            margin: None,
            on_boundary: false,
        };
    }
    let vectors = match deterministic_vectors(o, m, cap, "compatibility") {
        Ok(v) => v,
        Err(e) => return Compatibility::Undecided { reason: e.to_string() },
    };
    let sig = collection.signature();
    let mut p = SdpProblem::new(Sense::Minimize);
    let parents: Vec<usize> = vectors
        .iter()
        .map(|v| p.add_block(format!("G{v:?}"), sig.systems(), BlockKind::Hermitian))
        .collect();
    let layout = ParentLayout {
        vectors: vectors.clone(),
        parents: parents.clone(),
        chain: Vec::new(),
        sum_equality: 0,
        chain_equalities: Vec::new(),
        normalization: None,
        lmis: Vec::new(),
    };
    // The last outcome of each tester follows from the sum constraint.
    for alpha in 0..m {
        for a in 0..o - 1 {
            p.add_equality(
                format!("marginal {a}|{alpha}"),
                marginal_terms(&layout, alpha, a, 1.0),
                collection.effect(a, alpha).clone(),
            );
        }
    }
    p.add_equality(
        "parent sum",
        parents.iter().map(|&b| Term::whole(b, 1.0)).collect(),
        first.effect_sum(),
    );
    match check_feasibility(&p) {
        Ok(Feasibility::Feasible { witness, margin }) => Compatibility::Compatible {
            parent: witness,
            vectors,
            margin: Some(margin),
            on_boundary: false,
        },
        Ok(Feasibility::Undecided {
            witness: Some(witness),
            margin: Some(margin),
            ..
        }) if margin >= -FEASIBILITY_MARGIN => Compatibility::Compatible {
            parent: witness,
            vectors,
            margin: Some(margin),
            on_boundary: true,
        },
        Ok(Feasibility::Infeasible { margin, .. }) => Compatibility::Incompatible {
            reason: "no parent tester reproduces the collection".into(),
            margin: Some(margin),
        },
        Ok(Feasibility::Undecided { status, margin, .. }) => Compatibility::Undecided {
            reason: format!("phase-one solve ended with status {status:?}, margin {margin:?}"),
        },
        Err(e) => Compatibility::Undecided { reason: e.to_string() },
    }
}

/// Uniform normalization chain `Θ^(k) = x_k 1` with `Tr Θ^(1) = scale`,
/// returned as `[Θ^(1), ..., Θ^(n)]`.
fn uniform_chain(sig: &CombSignature, scale: f64) -> Vec<HermitianOperator> {
    let n = sig.slots();
    let mut x = scale / sig.dim(0) as f64;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        if k > 1 {
            x /= sig.dim(2 * k - 2) as f64;
        }
        out.push(HermitianOperator::identity(prefix_systems(sig, 2 * k - 2)).scale(x));
    }
    out
}

fn assemble_primal(p: &SdpProblem, layout: &ParentLayout, parent: HermitianOperator, chain: &[HermitianOperator]) -> Vec<HermitianOperator> {
    let mut blocks: Vec<HermitianOperator> = p.blocks.iter().map(|b| HermitianOperator::zeros(b.systems.clone())).collect();
    for &b in &layout.parents {
        blocks[b] = parent.clone();
    }
    for (k, &b) in layout.chain.iter().enumerate() {
        blocks[b] = chain[k].clone();
    }
    blocks
}

/// Chain multipliers `-c_k 1` with `c_k > c_{k+1} d_(2k-1)`, starting from a
/// top multiplier `-top 1` on the parent sum. Returns `c_2 d_1` (or `top d_1`
/// for one slot), the bound a normalization multiplier has to beat.
fn chain_multipliers(
    p: &SdpProblem,
    sig: &CombSignature,
    layout: &ParentLayout,
    top: f64,
    multipliers: &mut [HermitianOperator],
) -> f64 {
    let n = sig.slots();
    multipliers[layout.sum_equality] = scaled_identity(&p.constraints[layout.sum_equality].systems, -top);
    let mut c = top;
    let mut prev_dim = sig.dim(2 * n - 1);
    for (i, &ce) in layout.chain_equalities.iter().enumerate() {
        let k = n - i;
        c *= 2.0 * prev_dim as f64;
        multipliers[ce] = scaled_identity(&p.constraints[ce].systems, -c);
        prev_dim = sig.dim(2 * k - 3);
    }
    c * prev_dim as f64
}

fn scaled_identity(systems: &Systems, scale: f64) -> HermitianOperator {
    HermitianOperator::identity(systems.clone()).scale(scale)
}

/// Strictly feasible primal and dual points of the robustness program.
pub fn robustness_slater_check(collection: &TesterCollection) -> Result<SlaterReport> {
    let (p, layout) = robustness_problem(collection, DEFAULT_VECTOR_CAP)?;
    let sig = collection.signature();
    let lmax = collection
        .testers()
        .iter()
        .flat_map(|t| t.effects().iter().map(|e| e.max_eigenvalue()))
        .fold(0.0, f64::max);
    let o = collection.outcomes() as f64;
    let nvec = layout.vectors.len() as f64;
    // Parent marginals equal (x_n / o) 1, strictly above every effect.
    let xn = 2.0 * o * lmax + 1.0;
    let dims_below: f64 = (1..sig.slots()).map(|k| sig.dim(2 * k) as f64).product();
    let chain = uniform_chain(sig, xn * dims_below * sig.dim(0) as f64);
    let parent = HermitianOperator::identity(sig.systems()).scale(xn / nvec);
    let primal = assemble_primal(&p, &layout, parent, &chain);

    let mut mult: Vec<HermitianOperator> = p.constraints.iter().map(|c| HermitianOperator::zeros(c.systems.clone())).collect();
    // Walking up from Θ^(1), whose objective coefficient is 1: c_2 d_1 < 1, ...
    let n = sig.slots();
    let mut c = vec![0.0; n + 2];
    c[1] = 1.0;
    for k in 2..=n {
        c[k] = c[k - 1] / (2.0 * sig.dim(2 * k - 3) as f64);
    }
    let y_sum = c[n] / (2.0 * sig.dim(2 * n - 1) as f64);
    mult[layout.sum_equality] = HermitianOperator::identity(sig.systems()).scale(-y_sum);
    for (i, &ce) in layout.chain_equalities.iter().enumerate() {
        let k = n - i;
        mult[ce] = HermitianOperator::identity(p.constraints[ce].systems.clone()).scale(-c[k]);
    }
    let gamma = y_sum / (2.0 * collection.len() as f64);
    for row in &layout.lmis {
        for &ci in row {
            mult[ci] = HermitianOperator::identity(p.constraints[ci].systems.clone()).scale(gamma);
        }
    }
    check_slater_point(&p, &primal, &mult)
}

/// Strictly feasible points of the convex-weight program. The primal point is
/// interior only when every effect is positive definite.
pub fn weight_slater_check(collection: &TesterCollection) -> Result<SlaterReport> {
    let (p, layout, d) = convex_weight_problem(collection, &CompatibleCone::default())?;
    let sig = collection.signature();
    let lmin = collection
        .testers()
        .iter()
        .flat_map(|t| t.effects().iter().map(|e| e.min_eigenvalue()))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let o = collection.outcomes() as f64;
    let nvec = layout.vectors.len() as f64;
    let xn = 0.5 * o * lmin;
    let dims_below: f64 = (1..sig.slots()).map(|k| sig.dim(2 * k) as f64).product();
    let chain = uniform_chain(sig, xn * dims_below * sig.dim(0) as f64);
    let parent = HermitianOperator::identity(sig.systems()).scale(xn / nvec);
    let primal = assemble_primal(&p, &layout, parent, &chain);

    let mut mult: Vec<HermitianOperator> = p.constraints.iter().map(|c| HermitianOperator::zeros(c.systems.clone())).collect();
    let n = sig.slots();
    let e = 1.0;
    mult[layout.sum_equality] = HermitianOperator::identity(sig.systems()).scale(e);
    let mut y = e * sig.dim(2 * n - 1) as f64 / 2.0;
    for (i, &ce) in layout.chain_equalities.iter().enumerate() {
        let k = n - i;
        mult[ce] = HermitianOperator::identity(p.constraints[ce].systems.clone()).scale(y);
        y = y * sig.dim(2 * k - 3) as f64 / 2.0;
    }
    let gamma = 2.0 * (1.0 / (collection.len() as f64 * d) + e);
    for row in &layout.lmis {
        for &ci in row {
            mult[ci] = HermitianOperator::identity(p.constraints[ci].systems.clone()).scale(gamma);
        }
    }
    check_slater_point(&p, &primal, &mult)
}

/// Strictly feasible points of a normalized parent-tester program (used by the
/// compatible-scenario game values). `top` must exceed the largest eigenvalue
/// of every parent objective coefficient in minimization form.
pub(crate) fn normalized_parent_slater_check(p: &SdpProblem, sig: &CombSignature, layout: &ParentLayout, top: f64) -> Result<SlaterReport> {
    let nvec = layout.vectors.len() as f64;
    let chain = uniform_chain(sig, 1.0);
    let xn = chain.last().expect("at least one slot").max_eigenvalue();
    let parent = HermitianOperator::identity(sig.systems()).scale(xn / nvec);
    let primal = assemble_primal(p, layout, parent, &chain);
    let mut mult: Vec<HermitianOperator> = p.constraints.iter().map(|c| HermitianOperator::zeros(c.systems.clone())).collect();
    let last = chain_multipliers(p, sig, layout, top, &mut mult);
    if let Some(ci) = layout.normalization {
        mult[ci] = HermitianOperator::scalar(-2.0 * last);
    }
    check_slater_point(p, &primal, &mult)
}

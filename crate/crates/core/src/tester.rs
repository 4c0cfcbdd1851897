//! Quantum testers: normalization chains, network construction, Born rule,
//! canonical POVMs, mixing, and classical simulation of collections.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::comb::{channel_residual, memory_label, QuantumComb, CHAIN_TOL, CHANNEL_TOL};
use crate::error::{Error, Result};
use crate::signature::{CombSignature, Role};
use crate::tensor::{sum_operators, HermitianOperator, Systems, PSD_TOL};

/// Eigenvalue cutoff defining the support of a normalization operator.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Tolerance on the sum of a POVM.
pub const POVM_TOL: f64 = 1e-7;

/// A validated tester with its normalization chain `Ξ^(n), ..., Ξ^(1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumTester {
    signature: CombSignature,
    effects: Vec<HermitianOperator>,
    chain: Vec<HermitianOperator>,
}

/// All normalization residuals of a candidate tester.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TesterResiduals {
    /// Minimum eigenvalue of each effect.
    pub min_eigenvalues: Vec<f64>,
    /// `levels[k - 1]` is the residual of the condition defining `Ξ^(k)`; the
    /// top entry compares the effect sum with `1 ⊗ Ξ^(n)`.
    pub levels: Vec<f64>,
    /// `|Tr Ξ^(1) - 1|`.
    pub probe_trace_error: f64,
    pub probe_trace: f64,
}

impl TesterResiduals {
    pub fn first_error(&self) -> Option<Error> {
        for (x, &m) in self.min_eigenvalues.iter().enumerate() {
            if m < -PSD_TOL {
                return Some(Error::NotPositive {
                    min_eigenvalue: m,
                    effect: Some(x),
                });
            }
        }
        for (i, &r) in self.levels.iter().enumerate().rev() {
            if r > CHAIN_TOL {
                return Some(Error::NormalizationViolation {
                    level: i + 1,
                    residual: r,
                });
            }
        }
        if self.probe_trace_error > CHAIN_TOL {
            return Some(Error::ProbeNotNormalized(self.probe_trace));
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.first_error().is_none()
    }
}

fn tester_signature(effects: &[HermitianOperator], slots: usize) -> Result<CombSignature> {
    let first = effects
        .first()
        .ok_or_else(|| Error::SignatureMismatch("a tester needs at least one effect".into()))?;
    if slots == 0 {
        return Err(Error::SignatureMismatch("testers have at least one slot".into()));
    }
    let sig = CombSignature::from_systems(first.systems(), Role::Tester)?;
    if sig.slots() != slots {
        return Err(Error::SignatureMismatch(format!(
            "{slots}-slot tester needs {} systems, effects have {}",
            2 * slots,
            sig.num_systems()
        )));
    }
    if effects.iter().any(|e| e.systems() != first.systems()) {
        return Err(Error::SignatureMismatch("effects act on different systems".into()));
    }
    Ok(sig)
}

fn tester_chain(
    effects: &[HermitianOperator],
    sig: &CombSignature,
) -> Result<(TesterResiduals, Vec<HermitianOperator>)> {
    let n = sig.slots();
    let sum = sum_operators(effects)?;
    let last = 2 * n - 1;
    let mut levels = vec![0.0; n];
    let mut chain = Vec::with_capacity(n);

    let mut xi = sum.partial_trace(&[last])?.scale(1.0 / sig.dim(last) as f64);
    levels[n - 1] = sum.frobenius_distance(&xi.embed_identity(sum.systems())?)?;
    chain.push(xi.clone());
    for k in (2..=n).rev() {
        let (i, o) = (2 * k - 2, 2 * k - 3);
        let marginal = xi.partial_trace(&[i])?;
        let lower = marginal.partial_trace(&[o])?.scale(1.0 / sig.dim(o) as f64);
        levels[k - 2] = marginal.frobenius_distance(&lower.embed_identity(marginal.systems())?)?;
        chain.push(lower.clone());
        xi = lower;
    }
    let probe_trace = xi.trace();
    let residuals = TesterResiduals {
        min_eigenvalues: effects.iter().map(|e| e.min_eigenvalue()).collect(),
        levels,
        probe_trace_error: (probe_trace - 1.0).abs(),
        probe_trace,
    };
    Ok((residuals, chain))
}

pub fn tester_residuals(effects: &[HermitianOperator], slots: usize) -> Result<TesterResiduals> {
    let sig = tester_signature(effects, slots)?;
    Ok(tester_chain(effects, &sig)?.0)
}

/// Checks positivity and every normalization condition.
///
/// Levels are reported as `NormalizationViolation(k)` where `k` is the index
/// of the chain element whose defining condition failed: `k = n` for the
/// effect sum, `k < n` for the lower chain conditions.
pub fn validate_tester(effects: &[HermitianOperator], slots: usize) -> Result<QuantumTester> {
    let sig = tester_signature(effects, slots)?;
    let (residuals, chain) = tester_chain(effects, &sig)?;
    if let Some(e) = residuals.first_error() {
        return Err(e);
    }
    Ok(QuantumTester {
        signature: sig,
        effects: effects.to_vec(),
        chain,
    })
}

/// A POVM: PSD elements on one set of systems.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
}

impl Povm {
    /// Checks positivity and that the elements sum to the identity.
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let sum = sum_operators(&elements)?;
        for (x, e) in elements.iter().enumerate() {
            let m = e.min_eigenvalue();
            if m < -PSD_TOL {
                return Err(Error::NotPositive {
                    min_eigenvalue: m,
                    effect: Some(x),
                });
            }
        }
        let r = sum.frobenius_distance(&HermitianOperator::identity(sum.systems().clone()))?;
        if r > POVM_TOL {
            return Err(Error::NotAPovm(r));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

fn check_state(probe: &HermitianOperator) -> Result<()> {
    let m = probe.min_eigenvalue();
    if m < -PSD_TOL {
        return Err(Error::NotAState(format!("minimum eigenvalue {m:.3e}")));
    }
    let t = probe.trace();
    if (t - 1.0).abs() > CHAIN_TOL {
        return Err(Error::NotAState(format!("trace {t}")));
    }
    Ok(())
}

fn check_wiring(op: &HermitianOperator, open: &[usize], memory: &[usize], what: &str) -> Result<()> {
    for &i in open {
        if !op.systems().contains(i) {
            return Err(Error::SignatureMismatch(format!("{what} lacks system {i}")));
        }
    }
    for i in op.systems().indices() {
        if !open.contains(&i) && !memory.contains(&i) {
            return Err(Error::SignatureMismatch(format!("{what} acts on unexpected system {i}")));
        }
    }
    Ok(())
}

/// Contracts a probe state, intermediate channels, and a final POVM into a tester.
///
/// The probe acts on system 0 and optionally memory wire 0; channel `k`
/// (1-based) maps system `2k - 1` and wire `k - 1` to system `2k` and wire `k`;
/// the POVM acts on system `2n - 1` and wire `n - 1`. Memory wires use
/// [`memory_label`] and may be omitted where they are trivial.
pub fn tester_from_network(
    probe: &HermitianOperator,
    channels: &[HermitianOperator],
    povm: &Povm,
) -> Result<QuantumTester> {
    let n = channels.len() + 1;
    check_wiring(probe, &[0], &[memory_label(0)], "probe")?;
    check_state(probe)?;
    let mut head = probe.clone();
    for (i, ch) in channels.iter().enumerate() {
        let k = i + 1;
        check_wiring(ch, &[2 * k - 1, 2 * k], &[memory_label(k - 1), memory_label(k)], "channel")?;
        let outs: Vec<usize> = [2 * k, memory_label(k)]
            .into_iter()
            .filter(|&s| ch.systems().contains(s))
            .collect();
        let r = channel_residual(ch, &outs)?;
        if r > CHANNEL_TOL || ch.min_eigenvalue() < -PSD_TOL {
            return Err(Error::NotAChannel(k, r));
        }
        head = head.link(ch)?;
    }
    let last = 2 * n - 1;
    let mut effects = Vec::with_capacity(povm.len());
    for m in povm.elements() {
        check_wiring(m, &[last], &[memory_label(n - 1)], "POVM")?;
        let t = head.link(&m.transpose())?.transpose();
        effects.push(t);
    }
    let expect: Vec<usize> = (0..2 * n).collect();
    if effects[0].systems().indices() != expect {
        return Err(Error::SignatureMismatch(format!(
            "network leaves systems {:?} open; memory wires must match across components",
            effects[0].systems().indices()
        )));
    }
    validate_tester(&effects, n)
}

impl QuantumTester {
    pub fn signature(&self) -> &CombSignature {
        &self.signature
    }

    pub fn slots(&self) -> usize {
        self.signature.slots()
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    /// `Ξ^(n), ..., Ξ^(1)`.
    pub fn chain(&self) -> &[HermitianOperator] {
        &self.chain
    }

    /// The top normalization `Ξ^(n)`.
    pub fn normalization(&self) -> &HermitianOperator {
        &self.chain[0]
    }

    /// The probe state `Ξ^(1)`.
    pub fn probe(&self) -> &HermitianOperator {
        self.chain.last().expect("chain is never empty")
    }

    /// Appends zero effects up to `outcomes`.
    pub fn padded(&self, outcomes: usize) -> QuantumTester {
        let mut t = self.clone();
        while t.effects.len() < outcomes {
            t.effects
                .push(HermitianOperator::zeros(self.signature.systems()));
        }
        t
    }

    /// Identity-padded normalization `1_(2n-1) ⊗ Ξ^(n)`, equal to the effect sum.
    pub fn effect_sum(&self) -> HermitianOperator {
        self.normalization()
            .embed_identity(&self.signature.systems())
            .expect("normalization lives on a subset of the tester systems")
    }
}

/// `p(k) = Tr[T_k C]`, clamped into `[0, 1]`.
pub fn born_probabilities(tester: &QuantumTester, comb: &QuantumComb) -> Result<Vec<f64>> {
    if tester.slots() != comb.slots() + 1 || tester.signature.dims() != comb.signature().dims() {
        return Err(Error::SignatureMismatch(format!(
            "{}-slot tester on dims {:?} cannot measure a {}-slot comb on dims {:?}",
            tester.slots(),
            tester.signature.dims(),
            comb.slots(),
            comb.signature().dims()
        )));
    }
    tester
        .effects
        .iter()
        .map(|t| Ok(t.inner(comb.choi())?.clamp(0.0, 1.0)))
        .collect()
}

/// `P_j = (1 ⊗ Ξ^{-1/2}) T_j (1 ⊗ Ξ^{-1/2})` with the inverse taken on the support.
///
/// The elements sum to the projector onto the support of `1 ⊗ Ξ^(n)`.
pub fn canonical_povm(tester: &QuantumTester) -> Result<Povm> {
    let full = tester.signature.systems();
    let s = tester
        .normalization()
        .inv_sqrt_support(SUPPORT_TOL)?
        .embed_identity(&full)?;
    let elements = tester
        .effects
        .iter()
        .map(|t| t.sandwich(&s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Povm { elements })
}

/// Effect-wise mixture `p * t1 + (1 - p) * t2`.
pub fn mix_testers(t1: &QuantumTester, t2: &QuantumTester, p: f64) -> Result<QuantumTester> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadProbability(format!("mixing weight {p} outside [0, 1]")));
    }
    if t1.signature != t2.signature || t1.outcomes() != t2.outcomes() {
        return Err(Error::SignatureMismatch("testers differ in signature or outcome count".into()));
    }
    let effects = t1
        .effects
        .iter()
        .zip(&t2.effects)
        .map(|(a, b)| a.scale(p).add_scaled(b, 1.0 - p))
        .collect::<Result<Vec<_>>>()?;
    validate_tester(&effects, t1.slots())
}

/// Testers sharing one signature and one outcome count.
#[derive(Clone, Debug, PartialEq)]
pub struct TesterCollection {
    testers: Vec<QuantumTester>,
}

impl TesterCollection {
    /// Members with fewer outcomes are padded with zero effects.
    pub fn new(testers: Vec<QuantumTester>) -> Result<Self> {
        let first = testers
            .first()
            .ok_or_else(|| Error::SignatureMismatch("empty tester collection".into()))?;
        if testers.iter().any(|t| t.signature != first.signature) {
            return Err(Error::SignatureMismatch("collection members differ in signature".into()));
        }
        let o = testers.iter().map(|t| t.outcomes()).max().unwrap_or(0);
        Ok(Self {
            testers: testers.iter().map(|t| t.padded(o)).collect(),
        })
    }

    pub fn testers(&self) -> &[QuantumTester] {
        &self.testers
    }

    /// Number of testers `m`.
    pub fn len(&self) -> usize {
        self.testers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.testers.is_empty()
    }

    /// Shared outcome count `o`.
    pub fn outcomes(&self) -> usize {
        self.testers[0].outcomes()
    }

    pub fn signature(&self) -> &CombSignature {
        &self.testers[0].signature
    }

    pub fn slots(&self) -> usize {
        self.signature().slots()
    }

    /// `T_{a|α}`.
    pub fn effect(&self, a: usize, alpha: usize) -> &HermitianOperator {
        &self.testers[alpha].effects[a]
    }

    /// Applies one unitary conjugation `U T U†` to every effect.
    pub fn conjugated(&self, u: &nalgebra::DMatrix<crate::tensor::C64>) -> Result<Self> {
        let testers = self
            .testers
            .iter()
            .map(|t| {
                let effects = t
                    .effects
                    .iter()
                    .map(|e| e.conjugate_by(u))
                    .collect::<Result<Vec<_>>>()?;
                validate_tester(&effects, t.slots())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(testers)
    }
}

/// Column-stochastic table `p(row | column)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PostProcessing {
    table: DMatrix<f64>,
}

impl PostProcessing {
    pub fn new(table: DMatrix<f64>) -> Result<Self> {
        if table.ncols() == 0 || table.nrows() == 0 {
            return Err(Error::BadProbability("empty post-processing table".into()));
        }
        if table.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::BadProbability("post-processing has a negative entry".into()));
        }
        for (j, col) in table.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::BadProbability(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { table })
    }

    /// Rows given as `rows[r][c] = p(r | c)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::BadProbability("ragged post-processing table".into()));
        }
        Self::new(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            table: DMatrix::identity(n, n),
        }
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            table: DMatrix::from_element(rows, cols, 1.0 / rows as f64),
        }
    }

    /// Deterministic map `column ↦ map[column]`.
    pub fn deterministic(map: &[usize], rows: usize) -> Result<Self> {
        let mut t = DMatrix::zeros(rows, map.len());
        for (c, &r) in map.iter().enumerate() {
            if r >= rows {
                return Err(Error::BadProbability(format!("target {r} out of range {rows}")));
            }
            t[(r, c)] = 1.0;
        }
        Self::new(t)
    }

    pub fn rows(&self) -> usize {
        self.table.nrows()
    }

    pub fn cols(&self) -> usize {
        self.table.ncols()
    }

    /// `p(row | col)`.
    pub fn prob(&self, row: usize, col: usize) -> f64 {
        self.table[(row, col)]
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }
}

/// Classical simulation of a collection: shared randomness `p(λ)`, tester
/// choice `p(α | β, λ)` and relabeling `p(b | a, β, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub shared: Vec<f64>,
    /// Per `λ`: rows `α` (source testers), columns `β` (simulated testers).
    pub choice: Vec<PostProcessing>,
    /// Per `λ`, per `β`: rows `b` (new outcomes), columns `a` (source outcomes).
    pub relabel: Vec<Vec<PostProcessing>>,
}

impl Simulation {
    /// The simulation that returns the source unchanged.
    pub fn identity(testers: usize, outcomes: usize) -> Self {
        Self {
            shared: vec![1.0],
            choice: vec![PostProcessing::identity(testers)],
            relabel: vec![vec![PostProcessing::identity(outcomes); testers]],
        }
    }
}

/// `T'_{b|β} = Σ_λ p(λ) Σ_α p(α|β,λ) Σ_a p(b|a,β,λ) T_{a|α}`.
pub fn simulate_collection(source: &TesterCollection, sim: &Simulation) -> Result<TesterCollection> {
    let shared_total: f64 = sim.shared.iter().sum();
    if sim.shared.iter().any(|&p| p.is_nan() || p < 0.0) || (shared_total - 1.0).abs() > 1e-12 {
        return Err(Error::BadProbability("shared randomness is not a distribution".into()));
    }
    if sim.choice.len() != sim.shared.len() || sim.relabel.len() != sim.shared.len() {
        return Err(Error::BadProbability("one choice and relabel table per λ expected".into()));
    }
    let m = source.len();
    let o = source.outcomes();
    let s = sim.choice[0].cols();
    let o_new = sim.relabel[0].first().map_or(0, PostProcessing::rows);
    for (l, choice) in sim.choice.iter().enumerate() {
        if choice.rows() != m || choice.cols() != s || sim.relabel[l].len() != s {
            return Err(Error::BadProbability(format!("choice table {l} has the wrong shape")));
        }
        if sim.relabel[l].iter().any(|r| r.rows() != o_new || r.cols() != o) {
            return Err(Error::BadProbability(format!("relabel tables for λ = {l} have the wrong shape")));
        }
    }
    let systems = source.signature().systems();
    let mut testers = Vec::with_capacity(s);
    for beta in 0..s {
        let mut effects = vec![HermitianOperator::zeros(systems.clone()); o_new];
        for (l, &pl) in sim.shared.iter().enumerate() {
            for alpha in 0..m {
                let pa = pl * sim.choice[l].prob(alpha, beta);
                if pa == 0.0 {
                    continue;
                }
                for (b, eff) in effects.iter_mut().enumerate() {
                    for a in 0..o {
                        let w = pa * sim.relabel[l][beta].prob(b, a);
                        if w != 0.0 {
                            *eff = eff.add_scaled(source.effect(a, alpha), w)?;
                        }
                    }
                }
            }
        }
        testers.push(validate_tester(&effects, source.slots())?);
    }
    TesterCollection::new(testers)
}

/// Systems of an `n`-slot tester with the given dims; convenience for callers.
pub fn tester_systems(dims: &[usize]) -> Result<Systems> {
    Systems::from_dims(dims)
}

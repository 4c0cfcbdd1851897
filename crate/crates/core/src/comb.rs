//! Quantum combs: validation of the recursive causality chain, construction
//! from networks of channels with memory, and seeded random instances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::{random_channel, rng_from_seed};
use crate::signature::{CombSignature, Role};
use crate::tensor::{CMatrix, HermitianOperator, System, Systems, PSD_TOL};

/// Frobenius tolerance on every level of the causality chain.
pub const CHAIN_TOL: f64 = 1e-7;
/// Tolerance on `Tr_out J = 1_in` for channel teeth.
pub const CHANNEL_TOL: f64 = 1e-8;
/// Labels of internal memory wires; wire `k` connects tooth `k` to tooth `k + 1`.
pub const MEMORY_LABEL_BASE: usize = 1_000_000;

pub fn memory_label(k: usize) -> usize {
    MEMORY_LABEL_BASE + k
}

/// A validated comb with its reduced chain `C^(n-1), ..., C^(0)` followed by the
/// final scalar (which equals 1).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumComb {
    signature: CombSignature,
    choi: HermitianOperator,
    chain: Vec<HermitianOperator>,
}

/// Every causality residual of a candidate comb, computed without stopping at
/// the first failure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombResiduals {
    pub min_eigenvalue: f64,
    /// Residual of level `k` at position `k`.
    pub levels: Vec<f64>,
    /// `|Tr C^(0)-reduction - 1|`, the final normalization.
    pub normalization: f64,
}

impl CombResiduals {
    /// The error the validator raises for these residuals, if any.
    pub fn first_error(&self) -> Option<Error> {
        if self.min_eigenvalue < -PSD_TOL {
            return Some(Error::NotPositive {
                min_eigenvalue: self.min_eigenvalue,
                effect: None,
            });
        }
        for (level, &r) in self.levels.iter().enumerate().rev() {
            if r > CHAIN_TOL {
                return Some(Error::CausalityViolation { level, residual: r });
            }
        }
        if self.normalization > CHAIN_TOL {
            return Some(Error::CausalityViolation {
                level: 0,
                residual: self.normalization,
            });
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.first_error().is_none()
    }
}

fn check_comb_systems(op: &HermitianOperator, slots: usize) -> Result<CombSignature> {
    let sig = CombSignature::from_systems(op.systems(), Role::Comb)?;
    if sig.slots() != slots {
        return Err(Error::SignatureMismatch(format!(
            "{}-slot comb needs {} systems, operator has {}",
            slots,
            2 * slots + 2,
            sig.num_systems()
        )));
    }
    Ok(sig)
}

/// Walks the chain from the top level down, returning residuals and the
/// reduced operators `C^(n-1), ..., C^(0), scalar`.
fn comb_chain(op: &HermitianOperator, sig: &CombSignature) -> Result<(CombResiduals, Vec<HermitianOperator>)> {
    let n = sig.slots();
    let mut levels = vec![0.0; n + 1];
    let mut chain = Vec::with_capacity(n + 1);
    let mut cur = op.clone();
    for k in (0..=n).rev() {
        let (i, o) = (2 * k, 2 * k + 1);
        let reduced = cur.partial_trace(&[i, o])?.scale(1.0 / sig.dim(i) as f64);
        let marginal = cur.partial_trace(&[o])?;
        let expect = reduced.embed_identity(marginal.systems())?;
        levels[k] = marginal.frobenius_distance(&expect)?;
        chain.push(reduced.clone());
        cur = reduced;
    }
    let normalization = (cur.trace() - 1.0).abs();
    let residuals = CombResiduals {
        min_eigenvalue: op.min_eigenvalue(),
        levels,
        normalization,
    };
    Ok((residuals, chain))
}

/// Residuals of `op` as an `slots`-slot comb.
pub fn comb_residuals(op: &HermitianOperator, slots: usize) -> Result<CombResiduals> {
    let sig = check_comb_systems(op, slots)?;
    Ok(comb_chain(op, &sig)?.0)
}

/// Checks positivity and the causality chain, returning the validated comb.
pub fn validate_comb(op: &HermitianOperator, slots: usize) -> Result<QuantumComb> {
    let sig = check_comb_systems(op, slots)?;
    let (residuals, chain) = comb_chain(op, &sig)?;
    if let Some(e) = residuals.first_error() {
        return Err(e);
    }
    Ok(QuantumComb {
        signature: sig,
        choi: op.clone(),
        chain,
    })
}

/// Wraps `op` as a comb without rejecting it, returning its residuals so the
/// caller can decide what a failed check means.
pub(crate) fn unvalidated_comb(op: &HermitianOperator, slots: usize) -> Result<(QuantumComb, CombResiduals)> {
    let sig = check_comb_systems(op, slots)?;
    let (residuals, chain) = comb_chain(op, &sig)?;
    let comb = QuantumComb {
        signature: sig,
        choi: op.clone(),
        chain,
    };
    Ok((comb, residuals))
}

/// Checks `Tr_out J = 1_in` for a channel Choi operator.
pub fn channel_residual(choi: &HermitianOperator, outputs: &[usize]) -> Result<f64> {
    let marginal = choi.partial_trace(outputs)?;
    let id = HermitianOperator::identity(marginal.systems().clone());
    marginal.frobenius_distance(&id)
}

/// Choi operator `Σ_ij |i⟩⟨j| ⊗ Σ_k K|i⟩⟨j|K†` of a Kraus map from `inputs` to `outputs`.
pub fn choi_from_kraus(inputs: &[System], outputs: &[System], kraus: &[CMatrix]) -> Result<HermitianOperator> {
    let d_in: usize = inputs.iter().map(|s| s.dim).product();
    let d_out: usize = outputs.iter().map(|s| s.dim).product();
    for k in kraus {
        if k.nrows() != d_out || k.ncols() != d_in {
            return Err(Error::SignatureMismatch(format!(
                "Kraus operator is {}x{}, expected {d_out}x{d_in}",
                k.nrows(),
                k.ncols()
            )));
        }
    }
    let n = d_in * d_out;
    let m = CMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / d_out, r % d_out);
        let (j, b) = (c / d_out, c % d_out);
        kraus.iter().map(|k| k[(a, i)] * k[(b, j)].conj()).sum()
    });
    let order: Vec<System> = inputs.iter().chain(outputs).copied().collect();
    HermitianOperator::from_ordered(&order, m)
}

/// Choi operator of the identity channel between two systems of equal dimension.
pub fn identity_channel(input: System, output: System) -> Result<HermitianOperator> {
    if input.dim != output.dim {
        return Err(Error::SignatureMismatch("identity channel needs equal dimensions".into()));
    }
    choi_from_kraus(&[input], &[output], &[CMatrix::identity(input.dim, input.dim)])
}

fn tooth_systems(k: usize, last: usize, sig_dims: &[usize], memory_dims: &[usize]) -> (Vec<System>, Vec<System>) {
    let mut ins = vec![System::new(2 * k, sig_dims[2 * k])];
    let mut outs = vec![System::new(2 * k + 1, sig_dims[2 * k + 1])];
    if k > 0 {
        ins.push(System::new(memory_label(k - 1), memory_dims[k - 1]));
    }
    if k < last {
        outs.push(System::new(memory_label(k), memory_dims[k]));
    }
    (ins, outs)
}

/// Contracts channel teeth over their memory wires into a comb.
///
/// Tooth `k` maps open input `2k` plus memory wire `k - 1` to open output
/// `2k + 1` plus memory wire `k`, with memory wires labeled by [`memory_label`].
/// The first tooth has no incoming and the last no outgoing memory.
pub fn comb_from_network(teeth: &[HermitianOperator], memory_dims: &[usize]) -> Result<QuantumComb> {
    if teeth.is_empty() {
        return Err(Error::SignatureMismatch("a comb needs at least one tooth".into()));
    }
    let last = teeth.len() - 1;
    if memory_dims.len() != last {
        return Err(Error::SignatureMismatch(format!(
            "{} teeth need {} memory dimensions, got {}",
            teeth.len(),
            last,
            memory_dims.len()
        )));
    }
    let mut dims = vec![0usize; 2 * teeth.len()];
    for (k, t) in teeth.iter().enumerate() {
        for i in [2 * k, 2 * k + 1] {
            dims[i] = t.systems().dim_of(i).ok_or(Error::IndexNotFound(i))?;
        }
    }
    let mut comb: Option<HermitianOperator> = None;
    for (k, t) in teeth.iter().enumerate() {
        let (ins, outs) = tooth_systems(k, last, &dims, memory_dims);
        let expect = Systems::new(ins.iter().chain(&outs).copied())?;
        if t.systems() != &expect {
            return Err(Error::SignatureMismatch(format!(
                "tooth {k} acts on {:?} with dims {:?}, expected {:?} with dims {:?}",
                t.systems().indices(),
                t.systems().dims(),
                expect.indices(),
                expect.dims()
            )));
        }
        let out_idx: Vec<usize> = outs.iter().map(|s| s.index).collect();
        let r = channel_residual(t, &out_idx)?;
        if r > CHANNEL_TOL || t.min_eigenvalue() < -PSD_TOL {
            return Err(Error::NotAChannel(k, r));
        }
        comb = Some(match comb {
            None => t.clone(),
            Some(c) => c.link(t)?,
        });
    }
    validate_comb(&comb.expect("at least one tooth"), last)
}

/// Random comb whose teeth are channels induced by Haar isometries.
pub fn random_comb(signature: &CombSignature, memory_dims: &[usize], seed: u64) -> Result<QuantumComb> {
    let n = signature.slots();
    if signature.role() != Role::Comb || memory_dims.len() != n {
        return Err(Error::SignatureMismatch(format!(
            "{n}-slot comb needs {n} memory dimensions, got {}",
            memory_dims.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let teeth = (0..=n)
        .map(|k| {
            let (ins, outs) = tooth_systems(k, n, signature.dims(), memory_dims);
            random_channel(&mut rng, &ins, &outs)
        })
        .collect::<Result<Vec<_>>>()?;
    comb_from_network(&teeth, memory_dims)
}

/// Comb that discards every input and prepares maximally mixed outputs.
pub fn uniform_comb(signature: &CombSignature) -> QuantumComb {
    let op = HermitianOperator::identity(signature.systems()).scale(1.0 / signature.output_product() as f64);
    validate_comb(&op, signature.slots()).expect("the uniform comb satisfies every chain condition")
}

impl QuantumComb {
    pub fn signature(&self) -> &CombSignature {
        &self.signature
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn slots(&self) -> usize {
        self.signature.slots()
    }

    pub fn chain(&self) -> &[HermitianOperator] {
        &self.chain
    }

    /// Convex combination `p * self + (1 - p) * other`.
    pub fn mix(&self, other: &QuantumComb, p: f64) -> Result<QuantumComb> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability(format!("mixing weight {p} outside [0, 1]")));
        }
        let op = self.choi.scale(p).add_scaled(&other.choi, 1.0 - p)?;
        validate_comb(&op, self.slots())
    }
}

fn check_distribution(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::BadProbability(format!("{what} contains a negative or non-finite weight")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::BadProbability(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Weighted list of combs sharing one signature.
#[derive(Clone, Debug, PartialEq)]
pub struct CombEnsemble {
    combs: Vec<QuantumComb>,
    weights: Vec<f64>,
}

impl CombEnsemble {
    pub fn new(combs: Vec<QuantumComb>, weights: Vec<f64>) -> Result<Self> {
        if combs.is_empty() || combs.len() != weights.len() {
            return Err(Error::SignatureMismatch(format!(
                "{} combs with {} weights",
                combs.len(),
                weights.len()
            )));
        }
        check_distribution(&weights, "ensemble weights")?;
        if combs.iter().any(|c| c.signature != combs[0].signature) {
            return Err(Error::SignatureMismatch("ensemble combs have different signatures".into()));
        }
        Ok(Self { combs, weights })
    }

    pub fn combs(&self) -> &[QuantumComb] {
        &self.combs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.combs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combs.is_empty()
    }

    pub fn signature(&self) -> &CombSignature {
        &self.combs[0].signature
    }
}

/// Weighted list of ensembles `X_β`, all with the same signature and size.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleCollection {
    ensembles: Vec<CombEnsemble>,
    weights: Vec<f64>,
}

impl EnsembleCollection {
    pub fn new(ensembles: Vec<CombEnsemble>, weights: Vec<f64>) -> Result<Self> {
        if ensembles.is_empty() || ensembles.len() != weights.len() {
            return Err(Error::SignatureMismatch(format!(
                "{} ensembles with {} weights",
                ensembles.len(),
                weights.len()
            )));
        }
        check_distribution(&weights, "ensemble-collection weights")?;
        let first = &ensembles[0];
        if ensembles
            .iter()
            .any(|e| e.signature() != first.signature() || e.len() != first.len())
        {
            return Err(Error::SignatureMismatch(
                "ensembles differ in signature or comb count".into(),
            ));
        }
        Ok(Self { ensembles, weights })
    }

    pub fn ensembles(&self) -> &[CombEnsemble] {
        &self.ensembles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of ensembles `s`.
    pub fn len(&self) -> usize {
        self.ensembles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ensembles.is_empty()
    }

    /// Number of combs per ensemble.
    pub fn combs_per_ensemble(&self) -> usize {
        self.ensembles[0].len()
    }

    pub fn signature(&self) -> &CombSignature {
        self.ensembles[0].signature()
    }

    /// Joint weight `w(b, β) = w(β) w(b|β)`.
    pub fn joint_weight(&self, b: usize, beta: usize) -> f64 {
        self.weights[beta] * self.ensembles[beta].weights[b]
    }

    pub fn comb(&self, b: usize, beta: usize) -> &QuantumComb {
        &self.ensembles[beta].combs[b]
    }
}

//! Seeded generators for tester collections, simulations, and game ensembles.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::comb::{memory_label, random_comb, CombEnsemble, EnsembleCollection};
use crate::error::{Error, Result};
use crate::sampling::{
    derive_seed, dirichlet_uniform, random_channel, random_povm, random_projective, random_pure_state,
    rng_from_seed, SeededRng,
};
use crate::signature::CombSignature;
use crate::tensor::{HermitianOperator, System, Systems, C64};
use crate::tester::{
    mix_testers, tester_from_network, validate_tester, PostProcessing, Povm, QuantumTester, Simulation,
    TesterCollection,
};

/// Shape of a random tester network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub slots: usize,
    /// Dimension of every input (even) system; 1 gives probe-trivial testers.
    pub input_dim: usize,
    /// Dimension of every output (odd) system.
    pub output_dim: usize,
    /// Dimension of the memory carried between tester components.
    pub memory_dim: usize,
}

impl NetworkShape {
    pub fn probe_trivial(slots: usize, output_dim: usize) -> Self {
        Self {
            slots,
            input_dim: 1,
            output_dim,
            memory_dim: 1,
        }
    }

    pub fn qubits(slots: usize) -> Self {
        Self {
            slots,
            input_dim: 2,
            output_dim: 2,
            memory_dim: 2,
        }
    }

    pub fn signature(&self) -> Result<CombSignature> {
        if self.slots == 0 || self.memory_dim == 0 {
            return Err(Error::SignatureMismatch("a tester needs at least one slot and a memory".into()));
        }
        let dims = (0..2 * self.slots)
            .map(|i| if i % 2 == 0 { self.input_dim } else { self.output_dim })
            .collect();
        CombSignature::tester(dims)
    }
}

/// POVMs used at the end of a random tester network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmKind {
    /// Haar-random basis split into outcome classes.
    Projective,
    /// Naimark dilation of a Haar isometry (full rank).
    Generic,
}

struct Head {
    probe: HermitianOperator,
    channels: Vec<HermitianOperator>,
    /// Systems of the final POVM.
    povm_systems: Systems,
}

fn memory(shape: &NetworkShape, k: usize) -> Option<System> {
    (shape.memory_dim > 1).then(|| System::new(memory_label(k), shape.memory_dim))
}

/// Probe and intermediate channels of a network whose POVM is chosen later.
fn random_head(shape: &NetworkShape, rng: &mut SeededRng) -> Result<Head> {
    let n = shape.slots;
    let probe_sys = Systems::new(std::iter::once(System::new(0, shape.input_dim)).chain(memory(shape, 0)))?;
    let probe = random_pure_state(rng, probe_sys);
    let channels = (1..n)
        .map(|k| {
            let ins: Vec<System> = std::iter::once(System::new(2 * k - 1, shape.output_dim))
                .chain(memory(shape, k - 1))
                .collect();
            let outs: Vec<System> = std::iter::once(System::new(2 * k, shape.input_dim))
                .chain(memory(shape, k))
                .collect();
            random_channel(rng, &ins, &outs)
        })
        .collect::<Result<Vec<_>>>()?;
    let povm_systems =
        Systems::new(std::iter::once(System::new(2 * n - 1, shape.output_dim)).chain(memory(shape, n - 1)))?;
    Ok(Head {
        probe,
        channels,
        povm_systems,
    })
}

fn sample_povm(kind: PovmKind, rng: &mut SeededRng, systems: Systems, outcomes: usize) -> Result<Povm> {
    let elements = match kind {
        PovmKind::Projective => random_projective(rng, systems, outcomes),
        PovmKind::Generic => random_povm(rng, systems, outcomes),
    };
    Povm::new(elements)
}

/// `m` testers that share a random probe and channels and end in independent
/// random POVMs, so their normalization chains coincide.
pub fn random_collection(
    shape: &NetworkShape,
    testers: usize,
    outcomes: usize,
    kind: PovmKind,
    seed: u64,
) -> Result<TesterCollection> {
    shape.signature()?;
    let mut rng = rng_from_seed(seed);
    let head = random_head(shape, &mut rng)?;
    let members = (0..testers)
        .map(|_| {
            let povm = sample_povm(kind, &mut rng, head.povm_systems.clone(), outcomes)?;
            tester_from_network(&head.probe, &head.channels, &povm)
        })
        .collect::<Result<Vec<_>>>()?;
    TesterCollection::new(members)
}

/// Random column-stochastic table.
pub fn random_postprocessing(rng: &mut SeededRng, rows: usize, cols: usize) -> PostProcessing {
    let mut table = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for (i, p) in dirichlet_uniform(rng, rows).into_iter().enumerate() {
            table[(i, j)] = p;
        }
    }
    PostProcessing::new(table).expect("Dirichlet columns are distributions")
}

/// A compatible collection: one random parent tester with `parent_outcomes`
/// outcomes, post-processed by a random table per member.
pub fn compatible_collection(
    shape: &NetworkShape,
    testers: usize,
    outcomes: usize,
    parent_outcomes: usize,
    seed: u64,
) -> Result<(TesterCollection, QuantumTester)> {
    let parent = random_collection(shape, 1, parent_outcomes, PovmKind::Generic, seed)?.testers()[0].clone();
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let systems = parent.signature().systems();
    let members = (0..testers)
        .map(|_| {
            let post = random_postprocessing(&mut rng, outcomes, parent_outcomes);
            let effects = (0..outcomes)
                .map(|a| {
                    parent.effects().iter().enumerate().try_fold(
                        HermitianOperator::zeros(systems.clone()),
                        |acc, (k, e)| acc.add_scaled(e, post.prob(a, k)),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            validate_tester(&effects, parent.slots())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((TesterCollection::new(members)?, parent))
}

fn qubit_basis(axis: usize) -> [[C64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (z, o) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    match axis {
        0 => [[o, z], [z, o]],
        1 => [[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]],
        _ => [[C64::new(h, 0.0), C64::new(0.0, h)], [C64::new(h, 0.0), C64::new(0.0, -h)]],
    }
}

/// One-slot testers measuring a qubit output in the Z, X (and Y) bases.
///
/// With `input_dim = 1` the testers are probe-trivial; otherwise the probe is
/// the maximally mixed state on the input.
pub fn qubit_mub_collection(testers: usize, input_dim: usize) -> Result<TesterCollection> {
    if !(1..=3).contains(&testers) {
        return Err(Error::SignatureMismatch(format!("a qubit has 3 mutually unbiased bases, asked for {testers}")));
    }
    let probe_sys = Systems::new([System::new(0, input_dim)])?;
    let probe = HermitianOperator::identity(probe_sys).scale(1.0 / input_dim as f64);
    let out = Systems::new([System::new(1, 2)])?;
    let members = (0..testers)
        .map(|axis| {
            let elements = qubit_basis(axis)
                .iter()
                .map(|v| HermitianOperator::projector(out.clone(), v))
                .collect::<Result<Vec<_>>>()?;
            tester_from_network(&probe, &[], &Povm::new(elements)?)
        })
        .collect::<Result<Vec<_>>>()?;
    TesterCollection::new(members)
}

/// Trivial tester with the same normalization: every effect is `(1 ⊗ Ξ) / o`.
pub fn trivial_tester(tester: &QuantumTester) -> Result<QuantumTester> {
    let o = tester.outcomes();
    let e = tester.effect_sum().scale(1.0 / o as f64);
    validate_tester(&vec![e; o], tester.slots())
}

/// Mixes every member with its trivial tester: `η T + (1 - η) T_triv`.
pub fn with_white_noise(collection: &TesterCollection, visibility: f64) -> Result<TesterCollection> {
    let members = collection
        .testers()
        .iter()
        .map(|t| mix_testers(t, &trivial_tester(t)?, visibility))
        .collect::<Result<Vec<_>>>()?;
    TesterCollection::new(members)
}

/// Random ensemble collection for the combs measured by `tester_sig`:
/// `ensembles` ensembles of `combs` random combs each, Dirichlet weights.
pub fn random_ensembles(
    tester_sig: &CombSignature,
    ensembles: usize,
    combs: usize,
    memory_dim: usize,
    seed: u64,
) -> Result<EnsembleCollection> {
    let comb_sig = tester_sig.dual();
    let memory_dims = vec![memory_dim; comb_sig.slots()];
    let mut rng = rng_from_seed(seed);
    let mut stream = 0u64;
    let members = (0..ensembles)
        .map(|_| {
            let cs = (0..combs)
                .map(|_| {
                    stream += 1;
                    random_comb(&comb_sig, &memory_dims, derive_seed(seed, stream))
                })
                .collect::<Result<Vec<_>>>()?;
            CombEnsemble::new(cs, dirichlet_uniform(&mut rng, combs))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleCollection::new(members, dirichlet_uniform(&mut rng, ensembles))
}

/// Random simulation with `lambdas` values of shared randomness mapping `m`
/// testers with `o` outcomes to `s` testers with `o_new` outcomes.
pub fn random_simulation(m: usize, o: usize, s: usize, o_new: usize, lambdas: usize, seed: u64) -> Simulation {
    let mut rng = rng_from_seed(seed);
    let shared = dirichlet_uniform(&mut rng, lambdas);
    let choice = (0..lambdas).map(|_| random_postprocessing(&mut rng, m, s)).collect();
    let relabel = (0..lambdas)
        .map(|_| (0..s).map(|_| random_postprocessing(&mut rng, o_new, o)).collect())
        .collect();
    Simulation { shared, choice, relabel }
}

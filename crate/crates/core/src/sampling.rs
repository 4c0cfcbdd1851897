//! Seeded random instances: Haar isometries, channels, states, POVMs, and
//! probability vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::Result;
use crate::tensor::{CMatrix, HermitianOperator, System, Systems, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for stream `stream` of a parent seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random isometry `rows x cols` (`rows >= cols`): Gaussian matrix,
/// QR, and a phase fix so the distribution is exactly Haar.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry must not shrink the space");
    let qr = complex_gaussian(rng, rows, cols).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    haar_isometry(rng, dim, dim)
}

/// Choi operator of the channel `ρ ↦ Tr_env[V ρ V†]` for a Haar isometry `V`
/// with environment dimension `d_in * d_out`.
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    inputs: &[System],
    outputs: &[System],
) -> Result<HermitianOperator> {
    let d_in: usize = inputs.iter().map(|s| s.dim).product();
    let d_out: usize = outputs.iter().map(|s| s.dim).product();
    let d_env = d_in * d_out;
    let v = haar_isometry(rng, d_out * d_env, d_in);
    let n = d_in * d_out;
    let m = CMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / d_out, r % d_out);
        let (j, b) = (c / d_out, c % d_out);
        (0..d_env)
            .map(|e| v[(a * d_env + e, i)] * v[(b * d_env + e, j)].conj())
            .sum()
    });
    let order: Vec<System> = inputs.iter().chain(outputs).copied().collect();
    HermitianOperator::from_ordered(&order, m)
}

/// Random mixed state of full rank (normalized Wishart matrix).
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, systems: Systems) -> HermitianOperator {
    let d = systems.total_dim();
    let g = complex_gaussian(rng, d, d);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    HermitianOperator::new(systems, w.unscale(tr)).expect("Wishart matrices are Hermitian")
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, systems: Systems) -> HermitianOperator {
    let d = systems.total_dim();
    let v = haar_isometry(rng, d, 1);
    let amps: Vec<C64> = v.column(0).iter().copied().collect();
    HermitianOperator::projector(systems, &amps).expect("dimension matches")
}

/// Random POVM via Naimark dilation: `M_x = V†(|x⟩⟨x| ⊗ 1)V` for a Haar isometry `V`.
pub fn random_povm<R: Rng + ?Sized>(
    rng: &mut R,
    systems: Systems,
    outcomes: usize,
) -> Vec<HermitianOperator> {
    let d = systems.total_dim();
    let v = haar_isometry(rng, d * outcomes, d);
    (0..outcomes)
        .map(|x| {
            let block = v.rows(x * d, d);
            let m = block.adjoint() * block;
            HermitianOperator::new(systems.clone(), m).expect("Gram matrices are Hermitian")
        })
        .collect()
}

/// Random projective measurement: a Haar basis with basis vector `k` assigned to
/// outcome `k mod outcomes`.
pub fn random_projective<R: Rng + ?Sized>(
    rng: &mut R,
    systems: Systems,
    outcomes: usize,
) -> Vec<HermitianOperator> {
    let d = systems.total_dim();
    let u = haar_unitary(rng, d);
    let mut effects: Vec<CMatrix> = vec![CMatrix::zeros(d, d); outcomes];
    for k in 0..d {
        let col = u.column(k);
        effects[k % outcomes] += col * col.adjoint();
    }
    effects
        .into_iter()
        .map(|m| HermitianOperator::new(systems.clone(), m).expect("projectors are Hermitian"))
        .collect()
}

/// Uniform sample from the probability simplex (Dirichlet with all parameters 1).
pub fn dirichlet_uniform<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isometry_is_orthonormal() {
        let mut rng = rng_from_seed(3);
        let v = haar_isometry(&mut rng, 6, 3);
        let g = v.adjoint() * &v;
        assert!((g - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn random_channel_is_trace_preserving() {
        let mut rng = rng_from_seed(11);
        let j = random_channel(&mut rng, &[System::new(0, 2)], &[System::new(1, 3)]).unwrap();
        let marginal = j.partial_trace(&[1]).unwrap();
        let id = HermitianOperator::identity(marginal.systems().clone());
        assert!(marginal.frobenius_distance(&id).unwrap() < 1e-12);
        assert!(j.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn naimark_povm_sums_to_identity() {
        let s = Systems::from_dims(&[3]).unwrap();
        let mut rng = rng_from_seed(5);
        let povm = random_povm(&mut rng, s.clone(), 4);
        let sum = crate::tensor::sum_operators(&povm).unwrap();
        assert!(sum.frobenius_distance(&HermitianOperator::identity(s)).unwrap() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn dirichlet_is_normalized() {
        let mut rng = rng_from_seed(0);
        let w = dirichlet_uniform(&mut rng, 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }
}

//! Dense complex operators on ordered tensor products of labeled systems.
//!
//! Every operator carries a [`Systems`] list sorted by ascending system index;
//! the matrix uses row-major multi-indices in that order (lowest index is the
//! most significant digit). All constructors normalize to this ordering, so
//! operators can be exchanged between modules without permutation bookkeeping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance on `max|M - M†|` accepted as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Absolute floor on eigenvalues accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-8;

/// A labeled finite-dimensional system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct System {
    pub index: usize,
    pub dim: usize,
}

impl System {
    pub fn new(index: usize, dim: usize) -> Self {
        Self { index, dim }
    }
}

/// An ordered, duplicate-free set of systems.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Systems {
    list: Vec<System>,
}

impl Systems {
    pub fn new(systems: impl IntoIterator<Item = System>) -> Result<Self> {
        let mut list: Vec<System> = systems.into_iter().collect();
        list.sort_by_key(|s| s.index);
        for w in list.windows(2) {
            if w[0].index == w[1].index {
                return Err(Error::IndexCollision(w[0].index));
            }
        }
        if let Some(s) = list.iter().find(|s| s.dim == 0) {
            return Err(Error::SignatureMismatch(format!(
                "system {} has dimension 0",
                s.index
            )));
        }
        Ok(Self { list })
    }

    /// Systems `0..dims.len()` with the given dimensions.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        Self::new(dims.iter().enumerate().map(|(i, &d)| System::new(i, d)))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> impl Iterator<Item = &System> {
        self.list.iter()
    }

    pub fn as_slice(&self) -> &[System] {
        &self.list
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.list.iter().map(|s| s.dim).product()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.list.iter().map(|s| s.index).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.list.iter().map(|s| s.dim).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.dim_of(index).is_some()
    }

    pub fn dim_of(&self, index: usize) -> Option<usize> {
        self.list
            .binary_search_by_key(&index, |s| s.index)
            .ok()
            .map(|p| self.list[p].dim)
    }

    pub fn union(&self, other: &Systems) -> Result<Systems> {
        Systems::new(self.list.iter().chain(other.list.iter()).copied())
    }

    pub fn intersection(&self, other: &Systems) -> Systems {
        Systems {
            list: self
                .list
                .iter()
                .filter(|s| other.contains(s.index))
                .copied()
                .collect(),
        }
    }

    /// Systems with the given indices removed.
    pub fn without(&self, indices: &[usize]) -> Result<Systems> {
        for &i in indices {
            if !self.contains(i) {
                return Err(Error::IndexNotFound(i));
            }
        }
        Ok(Systems {
            list: self
                .list
                .iter()
                .filter(|s| !indices.contains(&s.index))
                .copied()
                .collect(),
        })
    }

    /// The sub-list with the given indices.
    pub fn select(&self, indices: &[usize]) -> Result<Systems> {
        let mut list = Vec::with_capacity(indices.len());
        for &i in indices {
            let d = self.dim_of(i).ok_or(Error::IndexNotFound(i))?;
            list.push(System::new(i, d));
        }
        Systems::new(list)
    }

    /// Checks that every system of `self` appears in `other` with the same dimension.
    pub fn check_subset_of(&self, other: &Systems) -> Result<()> {
        for s in &self.list {
            match other.dim_of(s.index) {
                None => return Err(Error::IndexNotFound(s.index)),
                Some(d) if d != s.dim => {
                    return Err(Error::SignatureMismatch(format!(
                        "system {} has dimension {} but {} was expected",
                        s.index, s.dim, d
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    fn stride_of(&self, index: usize) -> usize {
        self.list
            .iter()
            .skip_while(|s| s.index != index)
            .skip(1)
            .map(|s| s.dim)
            .product()
    }

    /// Flat offsets in `self` for every multi-index over `order` (row-major,
    /// first entry most significant). Every system in `order` must belong to `self`.
    pub(crate) fn offsets(&self, order: &[System]) -> Vec<usize> {
        let mut out = vec![0usize];
        for s in order {
            let stride = self.stride_of(s.index);
            let mut next = Vec::with_capacity(out.len() * s.dim);
            for &o in &out {
                for d in 0..s.dim {
                    next.push(o + d * stride);
                }
            }
            out = next;
        }
        out
    }
}

/// Dense Hermitian operator on a [`Systems`] list.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    systems: Systems,
    matrix: CMatrix,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

impl HermitianOperator {
    /// Checks the side length and Hermiticity, then stores the exact Hermitian part.
    pub fn new(systems: Systems, matrix: CMatrix) -> Result<Self> {
        let n = systems.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::SignatureMismatch(format!(
                "matrix is {}x{} but the systems have total dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                n
            )));
        }
        let asym = max_abs(&(&matrix - matrix.adjoint()));
        if asym > HERMITICITY_TOL * (1.0 + max_abs(&matrix)) {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self {
            systems,
            matrix: symmetrize(&matrix),
        })
    }

    /// Builds an operator whose matrix is laid out in the given (possibly
    /// unsorted) system order, permuting it into canonical ascending order.
    pub fn from_ordered(order: &[System], matrix: CMatrix) -> Result<Self> {
        let systems = Systems::new(order.iter().copied())?;
        let n = systems.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::SignatureMismatch(format!(
                "matrix is {}x{} but the systems have total dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                n
            )));
        }
        let off = systems.offsets(order);
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(off[i], off[j])] = matrix[(i, j)];
            }
        }
        Self::new(systems, out)
    }

    pub(crate) fn from_parts_unchecked(systems: Systems, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), systems.total_dim());
        Self {
            systems,
            matrix: symmetrize(&matrix),
        }
    }

    pub fn identity(systems: Systems) -> Self {
        let n = systems.total_dim();
        Self {
            systems,
            matrix: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(systems: Systems) -> Self {
        let n = systems.total_dim();
        Self {
            systems,
            matrix: CMatrix::zeros(n, n),
        }
    }

    /// A 1x1 operator on no systems.
    pub fn scalar(value: f64) -> Self {
        Self {
            systems: Systems::empty(),
            matrix: CMatrix::from_element(1, 1, C64::new(value, 0.0)),
        }
    }

    pub fn from_real_diagonal(systems: Systems, diag: &[f64]) -> Result<Self> {
        let n = systems.total_dim();
        if diag.len() != n {
            return Err(Error::SignatureMismatch(format!(
                "{} diagonal entries for dimension {n}",
                diag.len()
            )));
        }
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Ok(Self { systems, matrix: m })
    }

    /// Rank-one projector onto the (unnormalized) vector `v`.
    pub fn projector(systems: Systems, v: &[C64]) -> Result<Self> {
        let n = systems.total_dim();
        if v.len() != n {
            return Err(Error::SignatureMismatch(format!(
                "vector of length {} for dimension {n}",
                v.len()
            )));
        }
        let m = CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        Ok(Self { systems, matrix: m })
    }

    pub fn systems(&self) -> &Systems {
        &self.systems
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: self.matrix.scale(c),
        }
    }

    fn same_systems(&self, other: &Self) -> Result<()> {
        if self.systems != other.systems {
            return Err(Error::SignatureMismatch(format!(
                "operators act on {:?} and {:?}",
                self.systems.indices(),
                other.systems.indices()
            )));
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Result<Self> {
        self.same_systems(other)?;
        Ok(Self {
            systems: self.systems.clone(),
            matrix: &self.matrix + other.matrix.scale(c),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Real part of `Tr[self * other]`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_systems(other)?;
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum())
    }

    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    /// Full transpose (equal to complex conjugation for Hermitian operators).
    pub fn transpose(&self) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    /// `U * self * U†` for a unitary (or any square) `u` of matching size.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::SignatureMismatch("conjugating matrix has wrong size".into()));
        }
        Ok(Self::from_parts_unchecked(
            self.systems.clone(),
            u * &self.matrix * u.adjoint(),
        ))
    }

    /// Tensor product with an operator on disjoint systems, reordered canonically.
    pub fn kron_compose(&self, other: &Self) -> Result<Self> {
        let systems = self.systems.union(&other.systems)?;
        let n = systems.total_dim();
        let oa = systems.offsets(self.systems.as_slice());
        let ob = systems.offsets(other.systems.as_slice());
        let mut m = CMatrix::zeros(n, n);
        for (i1, &a1) in oa.iter().enumerate() {
            for (i2, &a2) in oa.iter().enumerate() {
                let x = self.matrix[(i1, i2)];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                for (j1, &b1) in ob.iter().enumerate() {
                    for (j2, &b2) in ob.iter().enumerate() {
                        m[(a1 + b1, a2 + b2)] = x * other.matrix[(j1, j2)];
                    }
                }
            }
        }
        Ok(Self { systems, matrix: m })
    }

    /// Traces out the listed systems.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        let kept = self.systems.without(traced)?;
        let gone = self.systems.select(traced)?;
        let ok = self.systems.offsets(kept.as_slice());
        let ot = self.systems.offsets(gone.as_slice());
        let n = kept.total_dim();
        let mut m = CMatrix::zeros(n, n);
        for (k1, &r) in ok.iter().enumerate() {
            for (k2, &c) in ok.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &ot {
                    acc += self.matrix[(r + t, c + t)];
                }
                m[(k1, k2)] = acc;
            }
        }
        Ok(Self {
            systems: kept,
            matrix: m,
        })
    }

    /// Places identities on the systems of `full` missing from `self`.
    pub fn embed_identity(&self, full: &Systems) -> Result<Self> {
        self.systems.check_subset_of(full)?;
        let extra = full.without(&self.systems.indices())?;
        let ok = full.offsets(self.systems.as_slice());
        let oe = full.offsets(extra.as_slice());
        let n = full.total_dim();
        let mut m = CMatrix::zeros(n, n);
        for (k1, &r) in ok.iter().enumerate() {
            for (k2, &c) in ok.iter().enumerate() {
                let x = self.matrix[(k1, k2)];
                for &t in &oe {
                    m[(r + t, c + t)] = x;
                }
            }
        }
        Ok(Self {
            systems: full.clone(),
            matrix: m,
        })
    }

    /// Transposes the listed systems only.
    pub fn partial_transpose(&self, systems: &[usize]) -> Result<Self> {
        let kept = self.systems.without(systems)?;
        let tr = self.systems.select(systems)?;
        let ok = self.systems.offsets(kept.as_slice());
        let ot = self.systems.offsets(tr.as_slice());
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for &k1 in &ok {
            for &k2 in &ok {
                for &t1 in &ot {
                    for &t2 in &ot {
                        m[(k1 + t2, k2 + t1)] = self.matrix[(k1 + t1, k2 + t2)];
                    }
                }
            }
        }
        Ok(Self {
            systems: self.systems.clone(),
            matrix: m,
        })
    }

    /// Link product `Tr_S[(A^{T_S} ⊗ 1)(1 ⊗ B)]` over the systems `S` shared by
    /// both operators; the result acts on the symmetric difference.
    pub fn link(&self, other: &Self) -> Result<Self> {
        let shared = self.systems.intersection(&other.systems);
        for s in shared.iter() {
            if other.systems.dim_of(s.index) != Some(s.dim) {
                return Err(Error::SignatureMismatch(format!(
                    "linked system {} has mismatched dimensions",
                    s.index
                )));
            }
        }
        let a_rest = self.systems.without(&shared.indices())?;
        let b_rest = other.systems.without(&shared.indices())?;
        let out = a_rest.union(&b_rest)?;
        let a_keep = self.systems.offsets(a_rest.as_slice());
        let a_link = self.systems.offsets(shared.as_slice());
        let b_keep = other.systems.offsets(b_rest.as_slice());
        let b_link = other.systems.offsets(shared.as_slice());
        let ra = out.offsets(a_rest.as_slice());
        let rb = out.offsets(b_rest.as_slice());
        let n = out.total_dim();
        let mut m = CMatrix::zeros(n, n);
        for (i1, &a1) in a_keep.iter().enumerate() {
            for (i2, &a2) in a_keep.iter().enumerate() {
                for (j1, &b1) in b_keep.iter().enumerate() {
                    for (j2, &b2) in b_keep.iter().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for (&am, &bm) in a_link.iter().zip(&b_link) {
                            for (&am2, &bm2) in a_link.iter().zip(&b_link) {
                                acc += self.matrix[(a1 + am, a2 + am2)]
                                    * other.matrix[(bm + b1, bm2 + b2)];
                            }
                        }
                        m[(ra[i1] + rb[j1], ra[i2] + rb[j2])] = acc;
                    }
                }
            }
        }
        Ok(Self::from_parts_unchecked(out, m))
    }

    /// Ascending eigenvalues with the matching orthonormal eigenvectors (columns).
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(self.dim(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().0.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigh().0.last().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Self {
        let (values, vectors) = self.eigh();
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            let fv = f(v);
            if fv == 0.0 {
                continue;
            }
            let col = vectors.column(k);
            m += (col * col.adjoint()).scale(fv);
        }
        Self::from_parts_unchecked(self.systems.clone(), m)
    }

    /// Pseudo-inverse square root: eigenvalues above `tolerance` map to `λ^{-1/2}`,
    /// the rest to zero.
    pub fn inv_sqrt_support(&self, tolerance: f64) -> Result<Self> {
        let min = self.min_eigenvalue();
        if min < -tolerance {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
                effect: None,
            });
        }
        Ok(self.spectral_map(|v| if v > tolerance { v.powf(-0.5) } else { 0.0 }))
    }

    /// Square root with eigenvalues at or below `tolerance` mapped to zero.
    pub fn sqrt_support(&self, tolerance: f64) -> Result<Self> {
        let min = self.min_eigenvalue();
        if min < -tolerance {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
                effect: None,
            });
        }
        Ok(self.spectral_map(|v| if v > tolerance { v.sqrt() } else { 0.0 }))
    }

    /// Orthogonal projector onto the eigenspace with eigenvalues above `tolerance`.
    pub fn support_projector(&self, tolerance: f64) -> Self {
        self.spectral_map(|v| if v > tolerance { 1.0 } else { 0.0 })
    }

    /// Product `self * other` (generally not Hermitian, returned as a raw matrix).
    pub fn product(&self, other: &Self) -> Result<CMatrix> {
        self.same_systems(other)?;
        Ok(&self.matrix * &other.matrix)
    }

    /// `a * self * a` for Hermitian `a` on the same systems.
    pub fn sandwich(&self, a: &Self) -> Result<Self> {
        self.same_systems(a)?;
        Ok(Self::from_parts_unchecked(
            self.systems.clone(),
            &a.matrix * &self.matrix * &a.matrix,
        ))
    }
}

/// Sums a non-empty list of operators on identical systems.
pub fn sum_operators<'a>(ops: impl IntoIterator<Item = &'a HermitianOperator>) -> Result<HermitianOperator> {
    let mut it = ops.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::SignatureMismatch("empty operator list".into()))?
        .clone();
    it.try_fold(first, |acc, op| acc.add(op))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(index: usize) -> Systems {
        Systems::new([System::new(index, 2)]).unwrap()
    }

    fn sigma_z(index: usize) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(qubit(index), &[1.0, -1.0]).unwrap()
    }

    fn identity_channel_choi() -> HermitianOperator {
        let s = Systems::from_dims(&[2, 2]).unwrap();
        let v = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        HermitianOperator::projector(s, &v).unwrap()
    }

    #[test]
    fn identities_compose_to_identity() {
        let a = HermitianOperator::identity(qubit(0));
        let b = HermitianOperator::identity(qubit(1));
        let ab = a.kron_compose(&b).unwrap();
        assert_eq!(ab.systems().indices(), vec![0, 1]);
        assert_eq!(ab.matrix(), &CMatrix::identity(4, 4));
    }

    #[test]
    fn compose_sorts_systems() {
        let z1 = sigma_z(1);
        let i0 = HermitianOperator::identity(qubit(0));
        let out = z1.kron_compose(&i0).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| out.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn compose_rejects_overlap() {
        let err = sigma_z(0).kron_compose(&sigma_z(0)).unwrap_err();
        assert_eq!(err, Error::IndexCollision(0));
    }

    #[test]
    fn identity_channel_marginal() {
        let phi = identity_channel_choi();
        let m = phi.partial_trace(&[1]).unwrap();
        assert_eq!(m, HermitianOperator::identity(qubit(0)));
        assert_eq!(phi.partial_trace(&[7]).unwrap_err(), Error::IndexNotFound(7));
    }

    #[test]
    fn product_state_factorizes() {
        let rho = HermitianOperator::new(
            qubit(0),
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]),
        )
        .unwrap();
        let sigma = HermitianOperator::from_real_diagonal(qubit(1), &[2.0, 1.0]).unwrap();
        let out = rho.kron_compose(&sigma).unwrap().partial_trace(&[1]).unwrap();
        assert!(out.frobenius_distance(&rho.scale(3.0)).unwrap() < 1e-14);
    }

    #[test]
    fn embedding_places_identity() {
        let xi = HermitianOperator::from_real_diagonal(qubit(0), &[0.25, 0.75]).unwrap();
        let full = Systems::from_dims(&[2, 2]).unwrap();
        let e = xi.embed_identity(&full).unwrap();
        let expect = xi.kron_compose(&HermitianOperator::identity(qubit(1))).unwrap();
        assert_eq!(e, expect);
        let s = HermitianOperator::scalar(1.0).embed_identity(&full).unwrap();
        assert_eq!(s, HermitianOperator::identity(full.clone()));
        let back = e.partial_trace(&[1]).unwrap();
        assert!(back.frobenius_distance(&xi.scale(2.0)).unwrap() < 1e-15);
    }

    #[test]
    fn embedding_checks_dims() {
        let xi = HermitianOperator::identity(Systems::new([System::new(0, 3)]).unwrap());
        let full = Systems::from_dims(&[2, 2]).unwrap();
        assert!(matches!(
            xi.embed_identity(&full),
            Err(Error::SignatureMismatch(_))
        ));
    }

    #[test]
    fn eigenvalue_helpers() {
        assert_eq!(HermitianOperator::identity(qubit(0)).min_eigenvalue(), 1.0);
        let d = HermitianOperator::from_real_diagonal(qubit(0), &[1.0, -0.5]).unwrap();
        assert!((d.min_eigenvalue() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_square_root() {
        let half = HermitianOperator::identity(qubit(0)).scale(0.5);
        let r = half.inv_sqrt_support(1e-8).unwrap();
        let expect = HermitianOperator::identity(qubit(0)).scale(2f64.sqrt());
        assert!(r.frobenius_distance(&expect).unwrap() < 1e-12);

        let d = HermitianOperator::from_real_diagonal(qubit(0), &[4.0, 0.0]).unwrap();
        let r = d.inv_sqrt_support(1e-8).unwrap();
        let expect = HermitianOperator::from_real_diagonal(qubit(0), &[0.5, 0.0]).unwrap();
        assert!(r.frobenius_distance(&expect).unwrap() < 1e-12);

        let neg = HermitianOperator::from_real_diagonal(qubit(0), &[1.0, -0.1]).unwrap();
        assert!(matches!(
            neg.inv_sqrt_support(1e-8),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianOperator::new(qubit(0), m),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn from_ordered_permutes() {
        // sigma_z on system 1 written in (1, 0) order.
        let m = HermitianOperator::from_real_diagonal(Systems::from_dims(&[2, 2]).unwrap(), &[1.0, 1.0, -1.0, -1.0])
            .unwrap();
        let op = HermitianOperator::from_ordered(&[System::new(1, 2), System::new(0, 2)], m.matrix().clone())
            .unwrap();
        let expect = sigma_z(1).embed_identity(&Systems::from_dims(&[2, 2]).unwrap()).unwrap();
        assert_eq!(op, expect);
    }

    #[test]
    fn link_over_everything_is_transpose_trace() {
        let a = identity_channel_choi();
        let b = HermitianOperator::from_real_diagonal(Systems::from_dims(&[2, 2]).unwrap(), &[0.1, 0.2, 0.3, 0.4])
            .unwrap();
        let l = a.link(&b).unwrap();
        assert!(l.systems().is_empty());
        let expect = a.transpose().inner(&b).unwrap();
        assert!((l.trace() - expect).abs() < 1e-14);
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = HermitianOperator::new(
            qubit(0),
            CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5, 0.0)]),
        )
        .unwrap();
        let b = sigma_z(1);
        let pt = a.kron_compose(&b).unwrap().partial_transpose(&[0]).unwrap();
        let expect = a.transpose().kron_compose(&b).unwrap();
        assert_eq!(pt, expect);
    }
}

//! Problem model over complex Hermitian (or real symmetric) matrix blocks and
//! its compilation to a real block-diagonal SDP in equality form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, HermitianOperator, Systems, C64};

/// How a block's matrix variable is represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Complex Hermitian, handled through the real-symmetric embedding of twice the side.
    Hermitian,
    /// Real symmetric.
    Real,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub systems: Systems,
    pub kind: BlockKind,
}

impl Block {
    pub fn side(&self) -> usize {
        self.systems.total_dim()
    }

    fn real_side(&self) -> usize {
        match self.kind {
            BlockKind::Hermitian => 2 * self.side(),
            BlockKind::Real => self.side(),
        }
    }
}

/// One summand `weight * (1 ⊗ Tr_traced X_block)` of a constraint, with the
/// identity placed on the constraint systems missing from the block.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub block: usize,
    pub weight: f64,
    pub traced: Vec<usize>,
}

impl Term {
    pub fn new(block: usize, weight: f64, traced: Vec<usize>) -> Self {
        Self { block, weight, traced }
    }

    /// `weight * X_block`, identity-embedded if the constraint is larger.
    pub fn whole(block: usize, weight: f64) -> Self {
        Self::new(block, weight, Vec::new())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `Σ terms = rhs`.
    Equality,
    /// `Σ terms ⪰ rhs`.
    Lmi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub kind: ConstraintKind,
    pub systems: Systems,
    pub terms: Vec<Term>,
    pub rhs: HermitianOperator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Block SDP: optimize `Σ_i Re Tr[A_i X_i]` over PSD blocks subject to
/// equality and LMI constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub sense: Sense,
    pub blocks: Vec<Block>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Option<HermitianOperator>>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            blocks: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, systems: Systems, kind: BlockKind) -> usize {
        self.blocks.push(Block {
            name: name.into(),
            systems,
            kind,
        });
        self.objective.push(None);
        self.blocks.len() - 1
    }

    fn add_constraint(
        &mut self,
        kind: ConstraintKind,
        name: impl Into<String>,
        terms: Vec<Term>,
        rhs: HermitianOperator,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            kind,
            systems: rhs.systems().clone(),
            terms,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// `Σ terms = rhs`; the constraint lives on the systems of `rhs`.
    pub fn add_equality(&mut self, name: impl Into<String>, terms: Vec<Term>, rhs: HermitianOperator) -> usize {
        self.add_constraint(ConstraintKind::Equality, name, terms, rhs)
    }

    /// `Σ terms ⪰ rhs`; the constraint lives on the systems of `rhs`.
    pub fn add_lmi(&mut self, name: impl Into<String>, terms: Vec<Term>, rhs: HermitianOperator) -> usize {
        self.add_constraint(ConstraintKind::Lmi, name, terms, rhs)
    }

    /// Adds `Re Tr[coefficient X_block]` to the objective.
    pub fn add_objective(&mut self, block: usize, coefficient: HermitianOperator) -> Result<()> {
        let slot = &mut self.objective[block];
        *slot = Some(match slot.take() {
            None => coefficient,
            Some(c) => c.add(&coefficient)?,
        });
        Ok(())
    }

    /// Checks that every index and system set is consistent.
    pub fn check(&self) -> Result<()> {
        for (i, obj) in self.objective.iter().enumerate() {
            if let Some(a) = obj {
                if a.systems() != &self.blocks[i].systems {
                    return Err(Error::SignatureMismatch(format!(
                        "objective coefficient of block {} acts on the wrong systems",
                        self.blocks[i].name
                    )));
                }
            }
        }
        for c in &self.constraints {
            for t in &c.terms {
                let block = self.blocks.get(t.block).ok_or_else(|| {
                    Error::SignatureMismatch(format!("constraint {} references block {}", c.name, t.block))
                })?;
                let kept = block.systems.without(&t.traced)?;
                kept.check_subset_of(&c.systems)?;
            }
        }
        Ok(())
    }

    /// `weight * (1 ⊗ Tr_traced X)` placed on the constraint systems.
    pub fn apply_term(&self, c: &Constraint, t: &Term, x: &HermitianOperator) -> Result<HermitianOperator> {
        Ok(x.partial_trace(&t.traced)?
            .embed_identity(&c.systems)?
            .scale(t.weight))
    }

    /// Adjoint of [`Self::apply_term`]: `weight * (1_traced ⊗ Tr_extra K)`.
    pub fn adjoint_term(&self, c: &Constraint, t: &Term, k: &HermitianOperator) -> Result<HermitianOperator> {
        let block = &self.blocks[t.block];
        let kept = block.systems.without(&t.traced)?;
        let extra = c.systems.without(&kept.indices())?;
        Ok(k.partial_trace(&extra.indices())?
            .embed_identity(&block.systems)?
            .scale(t.weight))
    }

    /// `Σ terms(X)` for constraint `index` at the given block values.
    pub fn constraint_value(&self, index: usize, blocks: &[HermitianOperator]) -> Result<HermitianOperator> {
        let c = &self.constraints[index];
        let mut acc = HermitianOperator::zeros(c.systems.clone());
        for t in &c.terms {
            acc = acc.add(&self.apply_term(c, t, &blocks[t.block])?)?;
        }
        Ok(acc)
    }

    /// Objective `Σ Re Tr[A_i X_i]` at the given block values.
    pub fn objective_value(&self, blocks: &[HermitianOperator]) -> Result<f64> {
        let mut v = 0.0;
        for (a, x) in self.objective.iter().zip(blocks) {
            if let Some(a) = a {
                v += a.inner(x)?;
            }
        }
        Ok(v)
    }

    /// Dual slack of every block for the minimization form of the problem
    /// (objective negated when maximizing): `C_i - Σ_c L_c*(Y_c)`.
    pub fn dual_slacks(&self, multipliers: &[HermitianOperator]) -> Result<Vec<HermitianOperator>> {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut z: Vec<HermitianOperator> = self
            .blocks
            .iter()
            .zip(&self.objective)
            .map(|(b, a)| match a {
                Some(a) => a.scale(sign),
                None => HermitianOperator::zeros(b.systems.clone()),
            })
            .collect();
        for (c, y) in self.constraints.iter().zip(multipliers) {
            for t in &c.terms {
                z[t.block] = z[t.block].sub(&self.adjoint_term(c, t, y)?)?;
            }
        }
        Ok(z)
    }
}

/// Symmetric sparse matrix stored with both triangles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn from_dense(m: &DMatrix<f64>, cutoff: f64) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v.abs() > cutoff {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }

    pub fn dot(&self, x: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * x[(i, j)]).sum()
    }

    pub fn add_to(&self, out: &mut DMatrix<f64>, scale: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += scale * v;
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum()
    }
}

/// One equality row `Σ_j ⟨A_j, X_j⟩ = b`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub parts: Vec<(usize, SparseSym)>,
}

impl Row {
    pub fn dot(&self, x: &[DMatrix<f64>]) -> f64 {
        self.parts.iter().map(|(j, a)| a.dot(&x[*j])).sum()
    }

    pub fn norm(&self) -> f64 {
        self.parts.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Real block SDP in standard form: minimize `⟨C, X⟩` subject to
/// `⟨A_r, X⟩ = b_r`, `X ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSdp {
    pub sides: Vec<usize>,
    pub rows: Vec<Row>,
    pub b: Vec<f64>,
    pub c: Vec<DMatrix<f64>>,
}

impl RealSdp {
    pub fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sides.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        for (r, &yr) in self.rows.iter().zip(y.iter()) {
            for (j, a) in &r.parts {
                a.add_to(&mut out[*j], yr);
            }
        }
        out
    }
}

/// Solver status shared by the real and the complex layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Raw solver output on a [`RealSdp`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealSolution {
    pub status: SdpStatus,
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// Origin of a compiled row: constraint index, basis element, and the factor
/// the row was divided by during normalization.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RowOrigin {
    pub constraint: usize,
    pub basis: usize,
    pub scale: f64,
}

/// A compiled problem together with the bookkeeping needed to map solutions back.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub sdp: RealSdp,
    pub(crate) origins: Vec<RowOrigin>,
    /// Real block index of the slack of each LMI constraint.
    pub(crate) slack_block: Vec<Option<usize>>,
    /// Set when two rows were found to be inconsistent.
    pub inconsistent: bool,
}

/// Orthonormal Hermitian basis of the `d x d` Hermitian matrices (real inner product).
pub(crate) fn hermitian_basis_element(d: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    if k < d {
        m[(k, k)] = C64::new(1.0, 0.0);
        return m;
    }
    let pair = (k - d) / 2;
    let imaginary = (k - d) % 2 == 1;
    // Enumerate i < j pairs row by row.
    let mut idx = pair;
    let mut i = 0;
    while idx >= d - 1 - i {
        idx -= d - 1 - i;
        i += 1;
    }
    let j = i + 1 + idx;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if imaginary {
        m[(i, j)] = C64::new(0.0, s);
        m[(j, i)] = C64::new(0.0, -s);
    } else {
        m[(i, j)] = C64::new(s, 0.0);
        m[(j, i)] = C64::new(s, 0.0);
    }
    m
}

/// `[[Re K, -Im K], [Im K, Re K]]`.
pub(crate) fn real_embedding(k: &CMatrix) -> DMatrix<f64> {
    let d = k.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let z = k[(r % d, c % d)];
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Primal value of a Hermitian block from its real-symmetric embedding.
pub(crate) fn extract_primal(s: &DMatrix<f64>, kind: BlockKind) -> CMatrix {
    match kind {
        BlockKind::Real => s.map(|v| C64::new(v, 0.0)),
        BlockKind::Hermitian => {
            let d = s.nrows() / 2;
            CMatrix::from_fn(d, d, |i, j| {
                C64::new(
                    0.5 * (s[(i, j)] + s[(d + i, d + j)]),
                    0.5 * (s[(d + i, j)] - s[(d + j, i)]),
                )
            })
        }
    }
}

/// Dual value of a Hermitian block from its real-symmetric embedding.
pub(crate) fn extract_dual(z: &DMatrix<f64>, kind: BlockKind) -> CMatrix {
    match kind {
        BlockKind::Real => z.map(|v| C64::new(v, 0.0)),
        BlockKind::Hermitian => extract_primal(z, kind).scale(2.0),
    }
}

fn coefficient(k: &HermitianOperator, kind: BlockKind) -> DMatrix<f64> {
    match kind {
        BlockKind::Hermitian => real_embedding(k.matrix()).scale(0.5),
        BlockKind::Real => k.matrix().map(|z| z.re),
    }
}

const ENTRY_CUTOFF: f64 = 1e-14;
/// Relative pivot threshold for declaring a row dependent on earlier ones.
const DEPENDENCE_TOL: f64 = 1e-10;
/// Tolerance on the right-hand side of a dependent row.
const CONSISTENCY_TOL: f64 = 1e-7;

impl SdpProblem {
    /// All blocks of the compiled problem: user blocks followed by LMI slacks.
    pub(crate) fn compiled_blocks(&self) -> Vec<Block> {
        let mut blocks = self.blocks.clone();
        for c in &self.constraints {
            if c.kind == ConstraintKind::Lmi {
                blocks.push(Block {
                    name: format!("{}::slack", c.name),
                    systems: c.systems.clone(),
                    kind: BlockKind::Hermitian,
                });
            }
        }
        blocks
    }

    /// Lowers the problem to a real SDP in minimization form, dropping zero and
    /// linearly dependent rows and normalizing every row to unit norm.
    pub fn compile(&self) -> Result<Compiled> {
        self.check()?;
        let blocks = self.compiled_blocks();
        let sides: Vec<usize> = blocks.iter().map(Block::real_side).collect();
        let mut slack_block = vec![None; self.constraints.len()];
        let mut next = self.blocks.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.kind == ConstraintKind::Lmi {
                slack_block[i] = Some(next);
                next += 1;
            }
        }

        let mut rows = Vec::new();
        let mut b = Vec::new();
        let mut origins = Vec::new();
        let mut inconsistent = false;
        for (ci, c) in self.constraints.iter().enumerate() {
            let d = c.systems.total_dim();
            for k in 0..d * d {
                let basis = HermitianOperator::from_parts_unchecked(c.systems.clone(), hermitian_basis_element(d, k));
                let mut dense: Vec<Option<DMatrix<f64>>> = vec![None; blocks.len()];
                for t in &c.terms {
                    let adj = self.adjoint_term(c, t, &basis)?;
                    let coef = coefficient(&adj, blocks[t.block].kind);
                    match &mut dense[t.block] {
                        Some(m) => *m += coef,
                        slot => *slot = Some(coef),
                    }
                }
                if let Some(s) = slack_block[ci] {
                    dense[s] = Some(coefficient(&basis, BlockKind::Hermitian).scale(-1.0));
                }
                let row = Row {
                    parts: dense
                        .into_iter()
                        .enumerate()
                        .filter_map(|(j, m)| m.map(|m| (j, SparseSym::from_dense(&m, ENTRY_CUTOFF))))
                        .filter(|(_, s)| !s.entries.is_empty())
                        .collect(),
                };
                let rhs = basis.inner(&c.rhs)?;
                let norm = row.norm();
                if norm == 0.0 {
                    if rhs.abs() > CONSISTENCY_TOL {
                        inconsistent = true;
                    }
                    continue;
                }
                let scaled = Row {
                    parts: row
                        .parts
                        .into_iter()
                        .map(|(j, mut s)| {
                            s.entries.iter_mut().for_each(|e| e.2 /= norm);
                            (j, s)
                        })
                        .collect(),
                };
                rows.push(scaled);
                b.push(rhs / norm);
                origins.push(RowOrigin {
                    constraint: ci,
                    basis: k,
                    scale: norm,
                });
            }
        }

        let (keep, dependent_inconsistent) = independent_rows(&rows, &b, &sides);
        inconsistent |= dependent_inconsistent;
        let rows: Vec<Row> = keep.iter().map(|&i| rows[i].clone()).collect();
        let b: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
        let origins: Vec<RowOrigin> = keep.iter().map(|&i| origins[i].clone()).collect();

        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let c: Vec<DMatrix<f64>> = blocks
            .iter()
            .enumerate()
            .map(|(j, blk)| match self.objective.get(j).and_then(Option::as_ref) {
                Some(a) => coefficient(a, blk.kind).scale(sign),
                None => DMatrix::zeros(sides[j], sides[j]),
            })
            .collect();

        Ok(Compiled {
            sdp: RealSdp { sides, rows, b, c },
            origins,
            slack_block,
            inconsistent,
        })
    }
}

/// Greedy pivoted Cholesky on the row Gram matrix. Returns the indices of a
/// maximal independent subset (in original order) and whether any dropped row
/// has a right-hand side inconsistent with the kept rows.
fn independent_rows(rows: &[Row], b: &[f64], sides: &[usize]) -> (Vec<usize>, bool) {
    let n = rows.len();
    if n == 0 {
        return (Vec::new(), false);
    }
    // Inverted index: flattened entry -> (row, value).
    let offsets: Vec<usize> = sides
        .iter()
        .scan(0usize, |acc, &s| {
            let o = *acc;
            *acc += s * s;
            Some(o)
        })
        .collect();
    let total: usize = sides.iter().map(|s| s * s).sum();
    let mut index: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
    for (r, row) in rows.iter().enumerate() {
        for (j, a) in &row.parts {
            for &(p, q, v) in &a.entries {
                index[offsets[*j] + p * sides[*j] + q].push((r, v));
            }
        }
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for list in &index {
        for &(k, vk) in list {
            for &(l, vl) in list {
                gram[(k, l)] += vk * vl;
            }
        }
    }

    let mut l_cols: Vec<DVector<f64>> = Vec::new();
    let mut diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    let mut chosen = vec![false; n];
    loop {
        // Prefer the earliest row among near-maximal pivots for determinism.
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !chosen[i] && best.is_none_or(|b| diag[i] > diag[b] * (1.0 + 1e-12)) {
                best = Some(i);
            }
        }
        let Some(p) = best else { break };
        if diag[p] <= DEPENDENCE_TOL * scale {
            break;
        }
        let piv = diag[p].sqrt();
        let mut col = DVector::<f64>::zeros(n);
        for i in 0..n {
            if chosen[i] || i == p {
                continue;
            }
            let mut v = gram[(i, p)];
            for lc in &l_cols {
                v -= lc[i] * lc[p];
            }
            col[i] = v / piv;
        }
        col[p] = piv;
        for i in 0..n {
            if !chosen[i] && i != p {
                diag[i] -= col[i] * col[i];
            }
        }
        chosen[p] = true;
        l_cols.push(col);
    }

    let mut keep: Vec<usize> = (0..n).filter(|&i| chosen[i]).collect();
    keep.sort_unstable();
    let dropped: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
    let mut inconsistent = false;
    if !dropped.is_empty() && !keep.is_empty() {
        let gk = DMatrix::from_fn(keep.len(), keep.len(), |i, j| gram[(keep[i], keep[j])]);
        let bk = DVector::from_iterator(keep.len(), keep.iter().map(|&i| b[i]));
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(ch) = gk.cholesky() {
            for &r in &dropped {
                let g = DVector::from_iterator(keep.len(), keep.iter().map(|&i| gram[(i, r)]));
                let coeffs = ch.solve(&g);
                let predicted = coeffs.dot(&bk);
                if (predicted - b[r]).abs() > CONSISTENCY_TOL * (1.0 + bmax) {
                    inconsistent = true;
                }
            }
        }
    } else if !dropped.is_empty() {
        inconsistent = dropped.iter().any(|&r| b[r].abs() > CONSISTENCY_TOL);
    }
    (keep, inconsistent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let d = 3;
        let basis: Vec<CMatrix> = (0..d * d).map(|k| hermitian_basis_element(d, k)).collect();
        for (i, a) in basis.iter().enumerate() {
            assert!((a - a.adjoint()).norm() < 1e-15);
            for (j, b) in basis.iter().enumerate() {
                let ip = (a * b).trace().re;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-14, "{i} {j} {ip}");
            }
        }
    }

    #[test]
    fn embedding_preserves_inner_products() {
        let k = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.3, -0.7), C64::new(0.3, 0.7), C64::new(-2.0, 0.0)],
        );
        let x = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(0.4, 0.0)],
        );
        let s = real_embedding(&x);
        let coef = real_embedding(&k).scale(0.5);
        let lhs = (&k * &x).trace().re;
        let rhs = coef.dot(&s);
        assert!((lhs - rhs).abs() < 1e-14);
        assert!((extract_primal(&s, BlockKind::Hermitian) - x).norm() < 1e-15);
    }
}

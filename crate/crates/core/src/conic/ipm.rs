//! Infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.

use nalgebra::{DMatrix, DVector};

use super::model::{RealSdp, RealSolution, SdpStatus};

/// Seam for substituting another conic solver behind the same contract.
pub trait ConicSolver: Sync {
    fn solve(&self, sdp: &RealSdp) -> RealSolution;
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmSettings {
    pub max_iterations: usize,
    /// Target on relative gap and relative infeasibilities.
    pub tolerance: f64,
    /// Gap `|p - d| / (1 + |p|)` still accepted as optimal when the target is missed.
    pub accept_gap: f64,
    /// Relative infeasibility still accepted as optimal when the target is missed.
    pub accept_infeasibility: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-9,
            accept_gap: 1e-6,
            accept_infeasibility: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteriorPoint {
    pub settings: IpmSettings,
}

impl InteriorPoint {
    pub fn new(settings: IpmSettings) -> Self {
        Self { settings }
    }
}

type Blocks = Vec<DMatrix<f64>>;

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[DMatrix<f64>]) -> f64 {
    inner(a, a).sqrt()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()).scale(0.5)
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factors have a nonzero diagonal")
}

/// Nesterov-Todd scaling of one block: `W = G Gᵀ` with `W Z W = X` and
/// `G⁻¹ X G⁻ᵀ = Gᵀ Z G = diag(λ)`.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
    x_chol: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let m = sym(&(l.transpose() * z * &l));
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return None;
    }
    let u = eig.eigenvectors;
    let quarter = eig.eigenvalues.map(|w| w.powf(-0.25));
    let g = &l * &u * DMatrix::from_diagonal(&quarter);
    let g_inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|w| w.powf(0.25))) * u.transpose() * lower_inverse(&l);
    let w = &g * g.transpose();
    Some(Scaling {
        g,
        g_inv,
        w,
        lambda: eig.eigenvalues.map(f64::sqrt),
        x_chol: l,
    })
}

/// Largest `α` with `M + α ΔM ⪰ 0`, given the Cholesky factor of `M`.
fn max_step(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let linv = lower_inverse(l);
    let b = sym(&(&linv * d * linv.transpose()));
    let min = b.symmetric_eigen().eigenvalues.min();
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

struct Workspace<'a> {
    sdp: &'a RealSdp,
    /// For every block, the rows touching it with the index of the part.
    rows_in_block: Vec<Vec<(usize, usize)>>,
}

impl<'a> Workspace<'a> {
    fn new(sdp: &'a RealSdp) -> Self {
        let mut rows_in_block = vec![Vec::new(); sdp.sides.len()];
        for (k, r) in sdp.rows.iter().enumerate() {
            for (p, (j, _)) in r.parts.iter().enumerate() {
                rows_in_block[*j].push((k, p));
            }
        }
        Self { sdp, rows_in_block }
    }

    /// Matrix whose column `k` stacks `svec(Gⱼᵀ A_kj Gⱼ)` over blocks, so that
    /// its Gram matrix is the Schur complement.
    fn scaled_rows(&self, scalings: &[Scaling]) -> DMatrix<f64> {
        let offsets: Vec<usize> = self
            .sdp
            .sides
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s * (s + 1) / 2;
                Some(o)
            })
            .collect();
        let total: usize = self.sdp.sides.iter().map(|s| s * (s + 1) / 2).sum();
        let mut out = DMatrix::<f64>::zeros(total, self.sdp.rows.len());
        for (j, rows) in self.rows_in_block.iter().enumerate() {
            let gt = scalings[j].g.transpose();
            let s = gt.nrows();
            for &(k, pk) in rows {
                let mut v = DMatrix::<f64>::zeros(s, s);
                for &(p, q, val) in &self.sdp.rows[k].parts[pk].1.entries {
                    v.ger(val, &gt.column(p), &gt.column(q), 1.0);
                }
                let mut idx = offsets[j];
                for c in 0..s {
                    out[(idx, k)] = v[(c, c)];
                    idx += 1;
                    for r in c + 1..s {
                        out[(idx, k)] = std::f64::consts::SQRT_2 * 0.5 * (v[(r, c)] + v[(c, r)]);
                        idx += 1;
                    }
                }
            }
        }
        out
    }

    /// `M_kl = Σ_j ⟨A_lj, W_j A_kj W_j⟩`.
    fn schur(&self, scalings: &[Scaling]) -> DMatrix<f64> {
        let m = self.sdp.rows.len();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (j, rows) in self.rows_in_block.iter().enumerate() {
            let w = &scalings[j].w;
            let s = w.nrows();
            for (ik, &(k, pk)) in rows.iter().enumerate() {
                let a = &self.sdp.rows[k].parts[pk].1;
                let mut v = DMatrix::<f64>::zeros(s, s);
                for &(p, q, val) in &a.entries {
                    v.ger(val, &w.column(p), &w.column(q), 1.0);
                }
                for &(l, pl) in &rows[ik..] {
                    out[(k, l)] += self.sdp.rows[l].parts[pl].1.dot(&v);
                }
            }
        }
        for k in 0..m {
            for l in k + 1..m {
                let v = out[(k, l)] + out[(l, k)];
                out[(k, l)] = v;
                out[(l, k)] = v;
            }
        }
        out
    }
}

/// Factor of the Schur complement `M = Bᵀ B`.
enum SchurFactor {
    /// Upper triangular `R` from a QR factorization of `B`. Avoids squaring
    /// the condition number when `W` degenerates near the boundary.
    Qr(DMatrix<f64>),
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(ws: &Workspace, scalings: &[Scaling]) -> Option<Self> {
        let r = ws.scaled_rows(scalings).qr().r();
        let diag = r.diagonal().map(f64::abs);
        if diag.min() > 1e-13 * diag.max() {
            return Some(Self::Qr(r));
        }
        let m = ws.schur(scalings);
        if let Some(c) = m.clone().cholesky() {
            return Some(Self::Cholesky(c));
        }
        let scale = m.diagonal().amax().max(1e-300);
        let n = m.nrows();
        for exp in [-14, -12, -10, -8] {
            let reg = &m + DMatrix::identity(n, n).scale(scale * 10f64.powi(exp));
            if let Some(c) = reg.cholesky() {
                return Some(Self::Cholesky(c));
            }
        }
        None
    }

    fn solve(&self, h: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Qr(r) => {
                let u = r.tr_solve_upper_triangular(h).expect("nonzero diagonal checked");
                r.solve_upper_triangular(&u).expect("nonzero diagonal checked")
            }
            Self::Cholesky(c) => c.solve(h),
        }
    }
}

struct Direction {
    dx: Blocks,
    dy: DVector<f64>,
    dz: Blocks,
}

fn direction(
    sdp: &RealSdp,
    scalings: &[Scaling],
    factor: &SchurFactor,
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    rc: &[DMatrix<f64>],
) -> Direction {
    let tmp: Blocks = rc
        .iter()
        .zip(rd)
        .zip(scalings)
        .map(|((c, d), s)| c - &s.w * d * &s.w)
        .collect();
    let h = rp - sdp.apply(&tmp);
    let mut dy = factor.solve(&h);
    let recover = |dy: &DVector<f64>| {
        let aty = sdp.adjoint(dy);
        let dz: Blocks = rd.iter().zip(&aty).map(|(d, a)| sym(&(d - a))).collect();
        let dx: Blocks = rc
            .iter()
            .zip(&dz)
            .zip(scalings)
            .map(|((c, z), s)| sym(&(c - &s.w * z * &s.w)))
            .collect();
        (dx, dz)
    };
    let (mut dx, mut dz) = recover(&dy);
    // Iterative refinement against the exact operators: an ill-conditioned or
    // regularized Schur complement otherwise leaks into primal feasibility.
    for _ in 0..REFINEMENT_STEPS {
        let e = rp - sdp.apply(&dx);
        if e.norm() <= 1e-15 * (1.0 + rp.norm()) {
            break;
        }
        dy += factor.solve(&e);
        (dx, dz) = recover(&dy);
    }
    Direction { dx, dy, dz }
}

const REFINEMENT_STEPS: usize = 2;
/// Iterations without a better merit before the loop gives up.
const STAGNATION_LIMIT: usize = 25;
/// Largest relative primal residual the final repair will try to remove.
const PRIMAL_REPAIR_LIMIT: f64 = 1e-6;
/// Alternating projection rounds used by the repair.
const REPAIR_ROUNDS: usize = 50;

fn step_lengths(scalings: &[Scaling], z: &[DMatrix<f64>], d: &Direction) -> Option<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (j, s) in scalings.iter().enumerate() {
        ap = ap.min(max_step(&s.x_chol, &d.dx[j]));
        let lz = z[j].clone().cholesky()?.l();
        ad = ad.min(max_step(&lz, &d.dz[j]));
    }
    Some((ap, ad))
}

#[derive(Clone)]
struct Iterate {
    x: Blocks,
    y: DVector<f64>,
    z: Blocks,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    rel_gap: f64,
}

impl Measures {
    fn reported_gap(&self) -> f64 {
        (self.pobj - self.dobj).abs() / (1.0 + self.pobj.abs())
    }

    fn merit(&self) -> f64 {
        self.rel_gap.max(self.pinf).max(self.dinf)
    }
}

fn measure(sdp: &RealSdp, it: &Iterate, bnorm: f64, cnorm: f64) -> (Measures, DVector<f64>, Blocks) {
    let b = DVector::from_column_slice(&sdp.b);
    let rp = &b - sdp.apply(&it.x);
    let aty = sdp.adjoint(&it.y);
    let rd: Blocks = sdp
        .c
        .iter()
        .zip(&aty)
        .zip(&it.z)
        .map(|((c, a), z)| c - a - z)
        .collect();
    let pobj = inner(&sdp.c, &it.x);
    let dobj = b.dot(&it.y);
    let xz = inner(&it.x, &it.z);
    let denom = 1.0 + pobj.abs() + dobj.abs();
    let m = Measures {
        pobj,
        dobj,
        pinf: rp.norm() / (1.0 + bnorm),
        dinf: norm(&rd) / (1.0 + cnorm),
        rel_gap: ((pobj - dobj).abs() / denom).max(xz.max(0.0) / denom),
    };
    (m, rp, rd)
}

fn initial_point(sdp: &RealSdp) -> Iterate {
    let mut x = Vec::with_capacity(sdp.sides.len());
    let mut z = Vec::with_capacity(sdp.sides.len());
    let mut row_norms: Vec<Vec<f64>> = vec![Vec::new(); sdp.sides.len()];
    let mut row_b: Vec<Vec<f64>> = vec![Vec::new(); sdp.sides.len()];
    for (r, &bk) in sdp.rows.iter().zip(&sdp.b) {
        for (j, a) in &r.parts {
            row_norms[*j].push(a.norm_sqr().sqrt());
            row_b[*j].push(bk);
        }
    }
    for (j, &s) in sdp.sides.iter().enumerate() {
        let n = s as f64;
        let mut xi = 10f64.max(n.sqrt());
        for (an, bk) in row_norms[j].iter().zip(&row_b[j]) {
            xi = xi.max(n * (1.0 + bk.abs()) / (1.0 + an));
        }
        let mut eta = 10f64.max(n.sqrt()).max(sdp.c[j].norm());
        for an in &row_norms[j] {
            eta = eta.max(*an);
        }
        x.push(DMatrix::identity(s, s).scale(xi));
        z.push(DMatrix::identity(s, s).scale(eta));
    }
    Iterate {
        x,
        y: DVector::zeros(sdp.rows.len()),
        z,
    }
}

fn finish(it: Iterate, m: &Measures, status: SdpStatus, iterations: usize) -> RealSolution {
    RealSolution {
        status,
        x: it.x,
        y: it.y,
        z: it.z,
        primal_objective: m.pobj,
        dual_objective: m.dobj,
        primal_infeasibility: m.pinf,
        dual_infeasibility: m.dinf,
        iterations,
    }
}

/// Minimum-norm correction of `x` onto the equality constraints, with the
/// smallest block eigenvalue of the result.
pub(crate) fn project_onto_equalities(sdp: &RealSdp, mut x: Vec<DMatrix<f64>>) -> Option<(Vec<DMatrix<f64>>, f64)> {
    let b = DVector::from_column_slice(&sdp.b);
    let rows = sdp.b.len();
    let mut gram = DMatrix::zeros(rows, rows);
    for j in 0..rows {
        let e = DVector::from_fn(rows, |i, _| if i == j { 1.0 } else { 0.0 });
        gram.set_column(j, &sdp.apply(&sdp.adjoint(&e)));
    }
    for _ in 0..2 {
        let r = &b - sdp.apply(&x);
        let lambda = gram.clone().svd(true, true).solve(&r, 1e-12).ok()?;
        for (xi, d) in x.iter_mut().zip(sdp.adjoint(&lambda)) {
            *xi += d;
        }
    }
    let residual = (&b - sdp.apply(&x)).norm() / (1.0 + b.norm());
    if residual > 1e-12 {
        return None;
    }
    let margin = x
        .iter()
        .map(|m| m.clone().symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min);
    Some((x, margin))
}

fn clip_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let vals = e.eigenvalues.map(|v| v.max(0.0));
    sym(&(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose()))
}

/// Alternates projection onto the equalities, together with the objective
/// level `target`, and PSD clipping. Returns the PSD point with the smallest
/// equality residual seen.
fn repair_primal(sdp: &RealSdp, mut x: Blocks, target: f64) -> Option<Blocks> {
    let rows = sdp.b.len();
    let lift = |v: &DVector<f64>| -> Blocks {
        let mut out = sdp.adjoint(&v.rows(0, rows).into_owned());
        for (o, c) in out.iter_mut().zip(&sdp.c) {
            *o += c.scale(v[rows]);
        }
        out
    };
    let lower = |x: &Blocks| -> DVector<f64> {
        let ax = sdp.apply(x);
        DVector::from_fn(rows + 1, |i, _| if i < rows { ax[i] } else { inner(&sdp.c, x) })
    };
    let rhs = DVector::from_fn(rows + 1, |i, _| if i < rows { sdp.b[i] } else { target });
    let mut gram = DMatrix::zeros(rows + 1, rows + 1);
    for j in 0..=rows {
        let e = DVector::from_fn(rows + 1, |i, _| if i == j { 1.0 } else { 0.0 });
        gram.set_column(j, &lower(&lift(&e)));
    }
    let solver = gram.svd(true, true);
    let b = DVector::from_column_slice(&sdp.b);
    let mut best: Option<(f64, Blocks)> = None;
    for _ in 0..REPAIR_ROUNDS {
        let lambda = solver.solve(&(&rhs - lower(&x)), 1e-12).ok()?;
        for (xi, d) in x.iter_mut().zip(lift(&lambda)) {
            *xi += d;
        }
        x = x.iter().map(clip_psd).collect();
        let r = (&b - sdp.apply(&x)).norm();
        if best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, x.clone()));
        } else {
            break;
        }
    }
    best.map(|(_, x)| x)
}

impl ConicSolver for InteriorPoint {
    fn solve(&self, sdp: &RealSdp) -> RealSolution {
        let st = &self.settings;
        let ws = Workspace::new(sdp);
        let n_total: f64 = sdp.sides.iter().sum::<usize>() as f64;
        let bnorm = sdp.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cnorm = norm(&sdp.c);

        let mut it = initial_point(sdp);
        let mut best: Option<(Iterate, Measures, usize)> = None;
        let mut prev_steps = (0.0f64, 0.0f64);
        let mut stalls = 0;

        for iter in 0..st.max_iterations {
            let (m, rp, rd) = measure(sdp, &it, bnorm, cnorm);
            if !m.merit().is_finite() {
                break;
            }
            if m.rel_gap <= st.tolerance && m.pinf <= st.tolerance && m.dinf <= st.tolerance {
                return finish(it, &m, SdpStatus::Optimal, iter);
            }
            let c_minus_rd = norm(
                &sdp.c
                    .iter()
                    .zip(&rd)
                    .map(|(c, r)| c - r)
                    .collect::<Vec<_>>(),
            );
            if m.dobj > 1e7 && c_minus_rd / m.dobj < 1e-7 {
                return finish(it, &m, SdpStatus::Infeasible, iter);
            }
            let b_minus_rp = (DVector::from_column_slice(&sdp.b) - &rp).norm();
            if -m.pobj > 1e7 && b_minus_rp / -m.pobj < 1e-7 {
                return finish(it, &m, SdpStatus::Unbounded, iter);
            }
            if best.as_ref().is_none_or(|(_, bm, _)| m.merit() < bm.merit()) {
                best = Some((it.clone(), m, iter));
            } else if best.as_ref().is_some_and(|(_, _, bk)| iter - bk >= STAGNATION_LIMIT) {
                break;
            }

            let Some(scalings) = it
                .x
                .iter()
                .zip(&it.z)
                .map(|(x, z)| nt_scaling(x, z))
                .collect::<Option<Vec<_>>>()
            else {
                break;
            };
            let Some(factor) = SchurFactor::new(&ws, &scalings) else {
                break;
            };
            let mu = inner(&it.x, &it.z) / n_total;

            // Predictor.
            let rc_aff: Blocks = it.x.iter().map(|x| -x).collect();
            let aff = direction(sdp, &scalings, &factor, &rp, &rd, &rc_aff);
            let Some((ap, ad)) = step_lengths(&scalings, &it.z, &aff) else {
                break;
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let x_aff: Blocks = it.x.iter().zip(&aff.dx).map(|(x, d)| x + d.scale(ap)).collect();
            let z_aff: Blocks = it.z.iter().zip(&aff.dz).map(|(z, d)| z + d.scale(ad)).collect();
            let mu_aff = inner(&x_aff, &z_aff) / n_total;
            let sigma = (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0);

            // Corrector.
            let rc: Blocks = scalings
                .iter()
                .zip(aff.dx.iter().zip(&aff.dz))
                .map(|(s, (dx, dz))| {
                    let dxt = &s.g_inv * dx * s.g_inv.transpose();
                    let dzt = s.g.transpose() * dz * &s.g;
                    let cross = sym(&(dxt * dzt));
                    let k = s.lambda.len();
                    let r = DMatrix::from_fn(k, k, |i, j| {
                        let diag = if i == j { sigma * mu - s.lambda[i] * s.lambda[i] } else { 0.0 };
                        2.0 * (diag - cross[(i, j)]) / (s.lambda[i] + s.lambda[j])
                    });
                    sym(&(&s.g * r * s.g.transpose()))
                })
                .collect();
            let d = direction(sdp, &scalings, &factor, &rp, &rd, &rc);
            let Some((ap, ad)) = step_lengths(&scalings, &it.z, &d) else {
                break;
            };
            let gamma = 0.9 + 0.09 * prev_steps.0.min(prev_steps.1);
            let ap = (gamma * ap).min(1.0);
            let ad = (gamma * ad).min(1.0);
            prev_steps = (ap, ad);

            for j in 0..it.x.len() {
                it.x[j] = sym(&(&it.x[j] + d.dx[j].scale(ap)));
                it.z[j] = sym(&(&it.z[j] + d.dz[j].scale(ad)));
            }
            it.y += d.dy.scale(ad);

            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        let (m, _, _) = measure(sdp, &it, bnorm, cnorm);
        let (it, m, iters) = match best {
            Some((bi, bm, bk)) if m.merit().is_nan() || m.merit() >= bm.merit() => (bi, bm, bk),
            _ => (it, m, st.max_iterations),
        };
        let accepted = |m: &Measures| {
            m.reported_gap() <= st.accept_gap && m.pinf <= st.accept_infeasibility && m.dinf <= st.accept_infeasibility
        };
        if accepted(&m) {
            return finish(it, &m, SdpStatus::Optimal, iters);
        }
        // Near-degenerate optima can stall with the gap closed but the primal
        // residual just above threshold. Try to repair x without leaving the cone.
        if m.reported_gap() <= st.accept_gap && m.dinf <= st.accept_infeasibility && m.pinf <= PRIMAL_REPAIR_LIMIT {
            if let Some(x) = repair_primal(sdp, it.x.clone(), m.dobj) {
                let repaired = Iterate { x, ..it.clone() };
                let (rm, _, _) = measure(sdp, &repaired, bnorm, cnorm);
                if accepted(&rm) {
                    return finish(repaired, &rm, SdpStatus::Optimal, iters);
                }
            }
        }
        finish(it, &m, SdpStatus::NumericalFailure, iters)
    }
}

//! Block semidefinite programming: problem model, interior-point solve,
//! phase-one feasibility, and certificate extraction.

mod ipm;
mod model;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use ipm::{ConicSolver, InteriorPoint, IpmSettings};
pub use model::{
    Block, BlockKind, Compiled, Constraint, ConstraintKind, RealSdp, RealSolution, Row, SdpProblem, SdpStatus,
    Sense, SparseSym, Term,
};

use crate::error::Result;
use crate::tensor::{CMatrix, HermitianOperator};
use ipm::project_onto_equalities;
use model::{extract_dual, extract_primal, hermitian_basis_element};

/// Solution of an [`SdpProblem`] in its own (complex) terms.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Objective in the problem's own sense.
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub gap: f64,
    pub blocks: Vec<HermitianOperator>,
    /// Dual slack of every block (minimization form).
    pub block_duals: Vec<HermitianOperator>,
    /// Multiplier of every constraint (minimization form). For an LMI this is
    /// the PSD multiplier paired with `Σ terms - rhs`.
    pub constraint_duals: Vec<HermitianOperator>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

pub(crate) fn to_operator(systems: &crate::tensor::Systems, m: CMatrix) -> HermitianOperator {
    HermitianOperator::from_parts_unchecked(systems.clone(), m)
}

/// Hermitian multipliers of every constraint from a dual vector of the compiled problem.
fn constraint_multipliers(problem: &SdpProblem, compiled: &Compiled, y: &DVector<f64>) -> Vec<HermitianOperator> {
    let mut out: Vec<CMatrix> = problem
        .constraints
        .iter()
        .map(|c| {
            let d = c.systems.total_dim();
            CMatrix::zeros(d, d)
        })
        .collect();
    for (o, &yr) in compiled.origins.iter().zip(y.iter()) {
        let d = problem.constraints[o.constraint].systems.total_dim();
        out[o.constraint] += hermitian_basis_element(d, o.basis).scale(yr / o.scale);
    }
    out.into_iter()
        .zip(&problem.constraints)
        .map(|(m, c)| to_operator(&c.systems, m))
        .collect()
}

fn extract(problem: &SdpProblem, compiled: &Compiled, raw: RealSolution) -> SdpSolution {
    let blocks_all = problem.compiled_blocks();
    let blocks: Vec<HermitianOperator> = problem
        .blocks
        .iter()
        .zip(&raw.x)
        .map(|(b, x)| to_operator(&b.systems, extract_primal(x, b.kind)))
        .collect();
    let block_duals: Vec<HermitianOperator> = problem
        .blocks
        .iter()
        .zip(&raw.z)
        .map(|(b, z)| to_operator(&b.systems, extract_dual(z, b.kind)))
        .collect();
    let mut constraint_duals = constraint_multipliers(problem, compiled, &raw.y);
    for (ci, slack) in compiled.slack_block.iter().enumerate() {
        if let Some(s) = slack {
            let blk = &blocks_all[*s];
            constraint_duals[ci] = to_operator(&blk.systems, extract_dual(&raw.z[*s], blk.kind));
        }
    }
    let (primal_value, dual_value) = match problem.sense {
        Sense::Minimize => (raw.primal_objective, raw.dual_objective),
        Sense::Maximize => (-raw.primal_objective, -raw.dual_objective),
    };
    SdpSolution {
        status: raw.status,
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs() / (1.0 + primal_value.abs()),
        blocks,
        block_duals,
        constraint_duals,
        primal_infeasibility: raw.primal_infeasibility,
        dual_infeasibility: raw.dual_infeasibility,
        iterations: raw.iterations,
    }
}

fn infeasible_solution(problem: &SdpProblem) -> SdpSolution {
    let zeros = |systems: &crate::tensor::Systems| HermitianOperator::zeros(systems.clone());
    SdpSolution {
        status: SdpStatus::Infeasible,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        gap: f64::NAN,
        blocks: problem.blocks.iter().map(|b| zeros(&b.systems)).collect(),
        block_duals: problem.blocks.iter().map(|b| zeros(&b.systems)).collect(),
        constraint_duals: problem.constraints.iter().map(|c| zeros(&c.systems)).collect(),
        primal_infeasibility: f64::INFINITY,
        dual_infeasibility: 0.0,
        iterations: 0,
    }
}

/// Solves with the built-in interior-point method.
pub fn solve_sdp(problem: &SdpProblem) -> Result<SdpSolution> {
    solve_sdp_with(problem, &InteriorPoint::default())
}

/// Solves with any [`ConicSolver`].
pub fn solve_sdp_with(problem: &SdpProblem, solver: &dyn ConicSolver) -> Result<SdpSolution> {
    let compiled = problem.compile()?;
    if compiled.inconsistent {
        return Ok(infeasible_solution(problem));
    }
    let raw = solver.solve(&compiled.sdp);
    Ok(extract(problem, &compiled, raw))
}

/// `|Tr[(Σ terms - rhs) ω]|` for every LMI, `None` for equalities.
pub fn complementary_slackness(problem: &SdpProblem, sol: &SdpSolution) -> Result<Vec<Option<f64>>> {
    problem
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.kind != ConstraintKind::Lmi {
                return Ok(None);
            }
            let slack = problem.constraint_value(i, &sol.blocks)?.sub(&c.rhs)?;
            Ok(Some(slack.inner(&sol.constraint_duals[i])?.abs()))
        })
        .collect()
}

/// Margin below which a feasibility verdict is left undecided.
pub const FEASIBILITY_MARGIN: f64 = 1e-7;

/// Verdict of [`check_feasibility`].
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    /// A point satisfying the constraints whose blocks and LMI slacks all have
    /// minimum eigenvalue at least `margin`.
    Feasible {
        witness: Vec<HermitianOperator>,
        margin: f64,
    },
    /// Phase-one optimum is negative; `certificate` holds its constraint multipliers.
    Infeasible {
        certificate: Vec<HermitianOperator>,
        margin: f64,
    },
    /// Margin within tolerance of zero, or the solver failed.
    Undecided {
        witness: Option<Vec<HermitianOperator>>,
        margin: Option<f64>,
        status: SdpStatus,
    },
}

impl Feasibility {
    pub fn margin(&self) -> Option<f64> {
        match self {
            Self::Feasible { margin, .. } | Self::Infeasible { margin, .. } => Some(*margin),
            Self::Undecided { margin, .. } => *margin,
        }
    }
}

/// Phase-one problem: every block shifted as `X = X' + tI` with `t = v - w`,
/// `v + u = 1`, maximizing `t`. The objective of `problem` is ignored.
pub fn check_feasibility(problem: &SdpProblem) -> Result<Feasibility> {
    check_feasibility_with(problem, &InteriorPoint::default())
}

pub fn check_feasibility_with(problem: &SdpProblem, solver: &dyn ConicSolver) -> Result<Feasibility> {
    let compiled = problem.compile()?;
    if compiled.inconsistent {
        return Ok(Feasibility::Infeasible {
            certificate: Vec::new(),
            margin: f64::NEG_INFINITY,
        });
    }
    let base = &compiled.sdp;
    let nb = base.sides.len();
    let (v, u, w) = (nb, nb + 1, nb + 2);
    let scalar = |val: f64| SparseSym {
        entries: vec![(0, 0, val)],
    };
    let mut rows = base.rows.clone();
    for r in &mut rows {
        let tau: f64 = r.parts.iter().map(|(_, a)| a.trace()).sum();
        if tau != 0.0 {
            r.parts.push((v, scalar(tau)));
            r.parts.push((w, scalar(-tau)));
        }
    }
    rows.push(Row {
        parts: vec![(v, scalar(std::f64::consts::FRAC_1_SQRT_2)), (u, scalar(std::f64::consts::FRAC_1_SQRT_2))],
    });
    let mut b = base.b.clone();
    b.push(std::f64::consts::FRAC_1_SQRT_2);
    let mut sides = base.sides.clone();
    sides.extend([1, 1, 1]);
    let mut c: Vec<DMatrix<f64>> = base.sides.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    c.push(DMatrix::from_element(1, 1, -1.0));
    c.push(DMatrix::zeros(1, 1));
    c.push(DMatrix::from_element(1, 1, 1.0));
    let phase1 = RealSdp { sides, rows, b, c };
    let raw = solver.solve(&phase1);

    let t = raw.x[v][(0, 0)] - raw.x[w][(0, 0)];
    let witness: Vec<HermitianOperator> = problem
        .blocks
        .iter()
        .zip(&raw.x)
        .map(|(blk, x)| {
            let shifted = x + DMatrix::identity(x.nrows(), x.ncols()).scale(t);
            to_operator(&blk.systems, extract_primal(&shifted, blk.kind))
        })
        .collect();
    if raw.status != SdpStatus::Optimal {
        // A stalled solve may still have found an interior point: project it
        // onto the equality constraints and accept it only if it stays strictly
        // positive.
        if t > FEASIBILITY_MARGIN {
            let shifted: Vec<DMatrix<f64>> = raw.x[..nb]
                .iter()
                .map(|x| x + DMatrix::identity(x.nrows(), x.ncols()).scale(t))
                .collect();
            if let Some((repaired, margin)) = project_onto_equalities(base, shifted) {
                if margin > FEASIBILITY_MARGIN {
                    let witness = problem
                        .blocks
                        .iter()
                        .zip(&repaired)
                        .map(|(blk, x)| to_operator(&blk.systems, extract_primal(x, blk.kind)))
                        .collect();
                    return Ok(Feasibility::Feasible { witness, margin });
                }
            }
        }
        return Ok(Feasibility::Undecided {
            witness: None,
            margin: None,
            status: raw.status,
        });
    }
    if t > FEASIBILITY_MARGIN {
        Ok(Feasibility::Feasible { witness, margin: t })
    } else if t < -FEASIBILITY_MARGIN {
        let y = DVector::from_iterator(base.rows.len(), raw.y.iter().take(base.rows.len()).copied());
        Ok(Feasibility::Infeasible {
            certificate: constraint_multipliers(problem, &compiled, &y),
            margin: t,
        })
    } else {
        Ok(Feasibility::Undecided {
            witness: Some(witness),
            margin: Some(t),
            status: raw.status,
        })
    }
}

/// Minimum-norm correction `x + Aᵀλ` with `A Aᵀ λ = b - A x`, returning the
/// corrected blocks and their smallest eigenvalue. `None` if the residual
/// cannot be removed.
/// Interiority report for a candidate primal point and dual multipliers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlaterReport {
    /// Largest Frobenius residual over equality constraints.
    pub equality_residual: f64,
    /// Minimum eigenvalue over blocks and LMI slacks.
    pub primal_min_eigenvalue: f64,
    /// Minimum eigenvalue over dual slacks of blocks and LMI multipliers.
    pub dual_min_eigenvalue: f64,
}

impl SlaterReport {
    pub fn is_strict(&self, tol: f64) -> bool {
        self.equality_residual <= tol && self.primal_min_eigenvalue > tol && self.dual_min_eigenvalue > tol
    }
}

/// Checks a constructed primal point and dual multipliers (minimization form)
/// for strict feasibility.
pub fn check_slater_point(
    problem: &SdpProblem,
    primal: &[HermitianOperator],
    multipliers: &[HermitianOperator],
) -> Result<SlaterReport> {
    let mut equality_residual: f64 = 0.0;
    let mut primal_min = f64::INFINITY;
    let mut dual_min = f64::INFINITY;
    for x in primal {
        primal_min = primal_min.min(x.min_eigenvalue());
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        let diff = problem.constraint_value(i, primal)?.sub(&c.rhs)?;
        match c.kind {
            ConstraintKind::Equality => equality_residual = equality_residual.max(diff.frobenius_norm()),
            ConstraintKind::Lmi => {
                primal_min = primal_min.min(diff.min_eigenvalue());
                dual_min = dual_min.min(multipliers[i].min_eigenvalue());
            }
        }
    }
    for z in problem.dual_slacks(multipliers)? {
        dual_min = dual_min.min(z.min_eigenvalue());
    }
    Ok(SlaterReport {
        equality_residual,
        primal_min_eigenvalue: primal_min,
        dual_min_eigenvalue: dual_min,
    })
}

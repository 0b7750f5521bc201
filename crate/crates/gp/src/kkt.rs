//! First-order optimality residuals of a log-space solution.

use crate::convex::{log_transform, ConvexProgram};
use crate::{GpError, GpProblem, GpSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest `posynomial - 1` over inequalities and `|monomial - 1|` over
    /// equalities, clipped at zero.
    pub feasibility: f64,
    /// `|grad f_0 + sum_k lambda_k grad f_k + C^T nu|_inf` in log space,
    /// divided by `max(1, |grad f_0|_inf)`.
    pub stationarity: f64,
    /// `max_k |lambda_k f_k|`, with the same scaling.
    pub complementarity: f64,
}

pub(crate) fn residuals(
    prog: &ConvexProgram,
    y: &[f64],
    ineq_duals: &[f64],
    eq_duals: &[f64],
) -> KktReport {
    let mut feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut grad = prog.objective.eval(y).gradient;
    let scale = grad.iter().fold(1.0f64, |acc, g| acc.max(g.abs()));
    for (f, &lam) in prog.inequalities.iter().zip(ineq_duals) {
        let ev = f.eval(y);
        feasibility = feasibility.max(ev.value.exp_m1());
        complementarity = complementarity.max((lam * ev.value).abs());
        for &i in &ev.support {
            grad[i] += lam * ev.gradient[i];
        }
    }
    for (eq, &nu) in prog.equalities.iter().zip(eq_duals) {
        feasibility = feasibility.max(eq.value(y).exp_m1().abs());
        for &(i, c) in &eq.coeffs {
            grad[i] += nu * c;
        }
    }
    KktReport {
        feasibility: feasibility.max(0.0),
        stationarity: grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) / scale,
        complementarity: complementarity / scale,
    }
}

/// Recomputes the residual report of `solution` against `problem`.
///
/// Missing multipliers are treated as zero, so an arbitrary candidate point
/// can be checked; an infeasible point simply reports a positive
/// feasibility residual.
pub fn verify_kkt(problem: &GpProblem, solution: &GpSolution) -> Result<KktReport, GpError> {
    let prog = log_transform(problem)?;
    if solution.values.len() != prog.dim {
        return Err(GpError::DimensionMismatch {
            expected: prog.dim,
            got: solution.values.len(),
        });
    }
    let y = solution.log_values();
    let mut ineq = solution.ineq_duals.clone();
    ineq.resize(prog.inequalities.len(), 0.0);
    let mut eq = solution.eq_duals.clone();
    eq.resize(prog.equalities.len(), 0.0);
    Ok(residuals(&prog, &y, &ineq, &eq))
}

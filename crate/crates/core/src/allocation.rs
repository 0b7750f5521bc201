//! Optimal investment in adaptation factors and acceptance rates.
//!
//! Both problems are posed as geometric programs over `(lt, zeta, eta, chi,
//! pi)`, where `lt = 1 - lambda` and `lambda` bounds `rho(B)`:
//!
//! - cost-constrained: minimize `1/lt` (as a power `lt^{-k}`) subject to a budget;
//! - performance-constrained: minimize the posynomial part of the total cost
//!   subject to `alpha_u <= alpha_bar`.
//!
//! Shared constraints: boxes on `chi` and `pi`,
//! `bar_m^2 lt zeta eta <chi pi>_{a^2} <= 1`,
//! `1/zeta + lt + bar_m <chi>_a <= 1` and `1/eta + lt + bar_m <pi>_a <= 1`.
//!
//! Cost of moving `chi` below one: `f(chi) = c (chi^{-p} - 1)` with
//! `c = (1 - lower) / (lower^{-p} - 1)`, so `f(1) = 0` and
//! `f(lower) = 1 - lower`; `g` has the same form in `pi` with exponent `q`.

use adsis_gp::{solve, GpError, GpProblem, GpSolution, Monomial, Posynomial, SolveStatus, SolverOptions, VarId};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundsError, TwoByTwoB};
use crate::model::{ModelError, ModelParams};

/// Log-distance within which a solution coordinate is moved onto its bound.
const SNAP_LOG_DISTANCE: f64 = 1e-2;
const REPORT_TOL: f64 = 1e-6;
const SLACK_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("{field} = {value} is outside [{lower}, {upper}]")]
    OutOfBox { field: &'static str, value: f64, lower: f64, upper: f64 },
    #[error("budget {budget} leaves no room: budget plus constant costs is {rhs}")]
    InfeasibleBudget { budget: f64, rhs: f64 },
    #[error("alpha_bar = {alpha_bar} is below the best achievable bound {best}")]
    PerformanceInfeasible { alpha_bar: f64, best: f64 },
    #[error("solver stopped with status {status}: {message}")]
    Solver { status: SolveStatus, message: String },
    #[error("bound at the solution {bound} exceeds the reported optimum {reported}")]
    Inconsistent { bound: f64, reported: f64 },
}

/// Cost exponents and box bounds for every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub p: f64,
    pub q: f64,
    pub chi_lower: Vec<f64>,
    pub chi_upper: Vec<f64>,
    pub pi_lower: Vec<f64>,
    pub pi_upper: Vec<f64>,
}

impl CostModel {
    /// Same bounds for every node, upper bounds 1.
    pub fn uniform(n: usize, p: f64, q: f64, chi_lower: f64, pi_lower: f64) -> Self {
        Self {
            p,
            q,
            chi_lower: vec![chi_lower; n],
            chi_upper: vec![1.0; n],
            pi_lower: vec![pi_lower; n],
            pi_upper: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.chi_lower.len()
    }

    pub fn validate(&self, n: usize) -> Result<(), AllocationError> {
        let bad = |msg: String| Err(AllocationError::InvalidCost(msg));
        if !(self.p > 0.0 && self.p.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return bad(format!("exponents must be positive, got p = {}, q = {}", self.p, self.q));
        }
        for (name, lo, hi) in [
            ("chi", &self.chi_lower, &self.chi_upper),
            ("pi", &self.pi_lower, &self.pi_upper),
        ] {
            if lo.len() != n || hi.len() != n {
                return bad(format!("{name} bounds need {n} entries"));
            }
            for (i, (&l, &u)) in lo.iter().zip(hi).enumerate() {
                if !(l > 0.0 && l <= u && u <= 1.0) {
                    return bad(format!("{name} bounds at node {i} must satisfy 0 < {l} <= {u} <= 1"));
                }
            }
        }
        Ok(())
    }

    /// `f_i^-`: the constant part of node `i`'s adaptation cost.
    pub fn f_constant(&self, i: usize) -> f64 {
        cost_constant(self.p, self.chi_lower[i])
    }

    /// `g_i^-`: the constant part of node `i`'s acceptance cost.
    pub fn g_constant(&self, i: usize) -> f64 {
        cost_constant(self.q, self.pi_lower[i])
    }

    /// `sum_i f_i(chi_i) + g_i(pi_i)` together with the per-node parts.
    pub fn investments(&self, chi: &[f64], pi: &[f64]) -> Result<(Vec<f64>, Vec<f64>), AllocationError> {
        let f = chi
            .iter()
            .zip(&self.chi_lower)
            .map(|(&x, &l)| cost_f(x, self.p, l))
            .collect::<Result<Vec<_>, _>>()?;
        let g = pi
            .iter()
            .zip(&self.pi_lower)
            .map(|(&x, &l)| cost_g(x, self.q, l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((f, g))
    }
}

/// `(1 - lower) / (lower^{-p} - 1)`, zero when `lower = 1`.
pub fn cost_constant(p: f64, lower: f64) -> f64 {
    if lower >= 1.0 {
        0.0
    } else {
        (1.0 - lower) / (lower.powf(-p) - 1.0)
    }
}

fn cost_shape(field: &'static str, x: f64, p: f64, lower: f64) -> Result<f64, AllocationError> {
    let tol = 1e-12;
    if !(x >= lower * (1.0 - tol) && x <= 1.0 + tol) {
        return Err(AllocationError::OutOfBox { field, value: x, lower, upper: 1.0 });
    }
    Ok(cost_constant(p, lower) * (x.powf(-p) - 1.0))
}

/// Cost of lowering the adaptation factor to `chi`.
pub fn cost_f(chi: f64, p: f64, chi_lower: f64) -> Result<f64, AllocationError> {
    cost_shape("chi", chi, p, chi_lower)
}

/// Cost of lowering the acceptance rate to `pi`.
pub fn cost_g(pi: f64, q: f64, pi_lower: f64) -> Result<f64, AllocationError> {
    cost_shape("pi", pi, q, pi_lower)
}

/// Budget that buys the lower bound for every node: `2n - sum(chi_lower + pi_lower)`.
pub fn c_max(cost: &CostModel) -> f64 {
    let n = cost.n() as f64;
    2.0 * n - cost.chi_lower.iter().sum::<f64>() - cost.pi_lower.iter().sum::<f64>()
}

/// Which allocation problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllocationKind {
    CostConstrained { budget: f64 },
    PerformanceConstrained { alpha_bar: f64 },
}

/// A coordinate that is either optimized or pinned by `lower == upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Var(VarId),
    Fixed(f64),
}

/// A built allocation GP and the map from its variables back to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationGp {
    pub problem: GpProblem,
    pub kind: AllocationKind,
    pub lt: VarId,
    pub zeta: VarId,
    pub eta: VarId,
    pub chi: Vec<Slot>,
    pub pi: Vec<Slot>,
    /// `k` when the objective is `lt^{-k}`, otherwise 1.
    pub objective_exponent: f64,
}

fn slot_monomial(slot: Slot, coeff: f64, exponent: f64) -> Result<Monomial, GpError> {
    match slot {
        Slot::Var(v) => Monomial::power(coeff, v, exponent),
        Slot::Fixed(x) => Monomial::constant(coeff * x.powf(exponent)),
    }
}

fn build_common(params: &ModelParams, cost: &CostModel, kind: AllocationKind) -> Result<AllocationGp, AllocationError> {
    params.validate()?;
    cost.validate(params.n)?;
    let n = params.n;
    let mut problem = GpProblem::new();
    let lt = problem.add_variable("lt");
    let zeta = problem.add_variable("zeta");
    let eta = problem.add_variable("eta");
    let slots = |name: &str, lo: &[f64], hi: &[f64], problem: &mut GpProblem| -> Vec<Slot> {
        (0..n)
            .map(|i| {
                if lo[i] == hi[i] {
                    Slot::Fixed(lo[i])
                } else {
                    Slot::Var(problem.add_variable(format!("{name}{i}")))
                }
            })
            .collect()
    };
    let chi = slots("chi", &cost.chi_lower, &cost.chi_upper, &mut problem);
    let pi = slots("pi", &cost.pi_lower, &cost.pi_upper, &mut problem);

    for (slots, lo, hi) in [(&chi, &cost.chi_lower, &cost.chi_upper), (&pi, &cost.pi_lower, &cost.pi_upper)] {
        for (i, s) in slots.iter().enumerate() {
            if let Slot::Var(v) = *s {
                problem.add_inequality(Monomial::power(1.0 / hi[i], v, 1.0)?);
                problem.add_inequality(Monomial::power(lo[i], v, -1.0)?);
            }
        }
    }

    let bar_m = params.bar_m();
    let nf = n as f64;
    let aux = Monomial::new(1.0, &[(lt, 1.0), (zeta, 1.0), (eta, 1.0)])?;
    let mut quad = Posynomial::new();
    for i in 0..n {
        let c = bar_m * bar_m * params.a[i] * params.a[i] / nf;
        let t = &(&slot_monomial(chi[i], c, 1.0)? * &slot_monomial(pi[i], 1.0, 1.0)?) * &aux;
        quad.push(t);
    }
    problem.add_inequality(quad);

    for (slots, aux_var) in [(&chi, zeta), (&pi, eta)] {
        let mut c = Posynomial::from_terms([
            Monomial::power(1.0, aux_var, -1.0)?,
            Monomial::power(1.0, lt, 1.0)?,
        ]);
        for (i, &s) in slots.iter().enumerate() {
            c.push(slot_monomial(s, bar_m * params.a[i] / nf, 1.0)?);
        }
        problem.add_inequality(c);
    }
    Ok(AllocationGp { problem, kind, lt, zeta, eta, chi, pi, objective_exponent: 1.0 })
}

/// `sum_i f_i^+(chi_i) + g_i^+(pi_i)` scaled by `scale`.
fn positive_cost_parts(gp: &AllocationGp, cost: &CostModel, scale: f64) -> Result<Posynomial, GpError> {
    let mut out = Posynomial::new();
    for i in 0..gp.chi.len() {
        out.push(slot_monomial(gp.chi[i], scale * cost.f_constant(i), -cost.p)?);
        out.push(slot_monomial(gp.pi[i], scale * cost.g_constant(i), -cost.q)?);
    }
    Ok(out)
}

fn total_constant(cost: &CostModel) -> f64 {
    (0..cost.n()).map(|i| cost.f_constant(i) + cost.g_constant(i)).sum()
}

/// Minimize `1/lt` subject to the shared constraints and
/// `sum(f^+ + g^+) <= budget + sum(f^- + g^-)`, divided through by the right-hand side.
pub fn build_cost_constrained_gp(
    params: &ModelParams,
    cost: &CostModel,
    budget: f64,
) -> Result<AllocationGp, AllocationError> {
    let rhs = budget + total_constant(cost);
    if !(budget >= 0.0) || !(rhs > 0.0) {
        return Err(AllocationError::InfeasibleBudget { budget, rhs });
    }
    let mut gp = build_common(params, cost, AllocationKind::CostConstrained { budget })?;
    // 1/lt is within rho(B) of one, so it carries little information at
    // double precision; lt^{-k} has the same argmin and an O(1) log-range.
    let corner = ModelParams { chi: cost.chi_lower.clone(), pi: cost.pi_lower.clone(), ..params.clone() };
    let rho_low = TwoByTwoB::from_params(&corner).spectral_radius()?;
    let k = (1.0 / rho_low).clamp(1.0, 1e8);
    gp.problem.set_objective(Monomial::power(1.0, gp.lt, -k)?);
    gp.objective_exponent = k;
    let budget_constraint = positive_cost_parts(&gp, cost, 1.0 / rhs)?;
    gp.problem.add_inequality(budget_constraint);
    Ok(gp)
}

/// `(beta n + 1 - delta - alpha_bar) / (beta n)`: the coefficient of `1/lt`
/// in the performance constraint.
pub fn performance_coefficient(params: &ModelParams, alpha_bar: f64) -> f64 {
    let bn = params.beta * params.n as f64;
    (bn + 1.0 - params.delta - alpha_bar) / bn
}

/// Minimize `sum(f^+ + g^+)` subject to the shared constraints and
/// `k / lt <= 1`; the latter is omitted when `k <= 0`.
pub fn build_performance_constrained_gp(
    params: &ModelParams,
    cost: &CostModel,
    alpha_bar: f64,
) -> Result<AllocationGp, AllocationError> {
    let mut gp = build_common(params, cost, AllocationKind::PerformanceConstrained { alpha_bar })?;
    let lower = ModelParams { chi: cost.chi_lower.clone(), pi: cost.pi_lower.clone(), ..params.clone() };
    let best = bounds::alpha_u(&lower)?;
    if alpha_bar < best {
        return Err(AllocationError::PerformanceInfeasible { alpha_bar, best });
    }
    let k = performance_coefficient(params, alpha_bar);
    if k > 0.0 {
        gp.problem.add_inequality(Monomial::power(k, gp.lt, -1.0)?);
    }
    let mut objective = Posynomial::new();
    for t in positive_cost_parts(&gp, cost, 1.0)?.terms() {
        // pinned coordinates only add constants, which do not move the argmin
        if !t.exponents().is_empty() {
            objective.push(t.clone());
        }
    }
    if objective.is_zero() {
        objective.push(Monomial::power(1.0, gp.lt, -1.0)?);
    }
    gp.problem.set_objective(objective);
    Ok(gp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub chi_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    /// `1 - delta + (1 - lt) n beta` at the optimum.
    pub alpha_u_star: f64,
    /// `alpha_u` recomputed from `chi_star`, `pi_star`.
    pub alpha_u_check: f64,
    pub lambda_tilde: f64,
    pub zeta: f64,
    pub eta: f64,
    /// `1 - lhs` of the `zeta` and `eta` constraints at the solver's point.
    pub relaxation_gap: [f64; 2],
    pub total_cost: f64,
    pub investments_f: Vec<f64>,
    pub investments_g: Vec<f64>,
    pub solver_status: String,
    pub solver_message: Option<String>,
    pub newton_steps: usize,
    pub kkt_residual: f64,
    pub feasibility_residual: f64,
    /// True when coordinates within the solver's tolerance of a bound were moved onto it.
    pub snapped: bool,
}

impl AllocationResult {
    pub fn investment(&self, i: usize) -> f64 {
        self.investments_f[i] + self.investments_g[i]
    }
}

fn read_slots(slots: &[Slot], sol: &GpSolution) -> Vec<f64> {
    slots
        .iter()
        .map(|&s| match s {
            Slot::Var(v) => sol.value(v),
            Slot::Fixed(x) => x,
        })
        .collect()
}

fn clamp_into(values: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &u) in values.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, u);
    }
}

/// Moves coordinates within `SNAP_LOG_DISTANCE` of `target` onto it.
fn snap_towards(values: &[f64], target: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(target)
        .map(|(&v, &t)| if (v / t).ln().abs() <= SNAP_LOG_DISTANCE { t } else { v })
        .collect()
}

pub fn solve_allocation(
    params: &ModelParams,
    cost: &CostModel,
    kind: AllocationKind,
    options: &SolverOptions,
) -> Result<AllocationResult, AllocationError> {
    let gp = match kind {
        AllocationKind::CostConstrained { budget } => build_cost_constrained_gp(params, cost, budget)?,
        AllocationKind::PerformanceConstrained { alpha_bar } => {
            build_performance_constrained_gp(params, cost, alpha_bar)?
        }
    };
    // Active slacks shrink like mu / dual, and the duals grow with the
    // objective exponent; stop before they fall below double precision.
    let mut options = options.clone();
    let floor = SLACK_FLOOR * gp.objective_exponent * gp.problem.inequalities.len() as f64;
    options.gap_tol = options.gap_tol.max(floor);
    let sol = solve(&gp.problem, &options)?;
    match sol.status {
        SolveStatus::Infeasible => {
            return Err(match kind {
                AllocationKind::PerformanceConstrained { alpha_bar } => AllocationError::PerformanceInfeasible {
                    alpha_bar,
                    best: f64::NAN,
                },
                AllocationKind::CostConstrained { .. } => AllocationError::Solver {
                    status: sol.status,
                    message: sol.message.clone().unwrap_or_default(),
                },
            })
        }
        SolveStatus::Optimal | SolveStatus::MaxIterations => {}
    }
    finish(params, cost, &gp, &sol)
}

fn finish(
    params: &ModelParams,
    cost: &CostModel,
    gp: &AllocationGp,
    sol: &GpSolution,
) -> Result<AllocationResult, AllocationError> {
    let n = params.n;
    let mut chi = read_slots(&gp.chi, sol);
    let mut pi = read_slots(&gp.pi, sol);
    clamp_into(&mut chi, &cost.chi_lower, &cost.chi_upper);
    clamp_into(&mut pi, &cost.pi_lower, &cost.pi_upper);
    let with = |chi: &[f64], pi: &[f64]| ModelParams { chi: chi.to_vec(), pi: pi.to_vec(), ..params.clone() };
    let total = |chi: &[f64], pi: &[f64]| -> Result<f64, AllocationError> {
        let (f, g) = cost.investments(chi, pi)?;
        Ok(f.iter().sum::<f64>() + g.iter().sum::<f64>())
    };

    let lt = sol.value(gp.lt);
    let alpha_gp = 1.0 - params.delta + (1.0 - lt) * n as f64 * params.beta;
    let alpha_raw = bounds::alpha_u(&with(&chi, &pi))?;
    let cost_raw = total(&chi, &pi)?;

    // The barrier stops a tolerance away from active box bounds. Snap in the
    // direction that improves the objective and keep the result only if it is
    // feasible and no worse.
    let (snap_chi, snap_pi) = match gp.kind {
        AllocationKind::CostConstrained { .. } => (&cost.chi_lower, &cost.pi_lower),
        AllocationKind::PerformanceConstrained { .. } => (&cost.chi_upper, &cost.pi_upper),
    };
    let cand_chi = snap_towards(&chi, snap_chi);
    let cand_pi = snap_towards(&pi, snap_pi);
    let mut snapped = false;
    if cand_chi != chi || cand_pi != pi {
        let a = bounds::alpha_u(&with(&cand_chi, &cand_pi))?;
        let c = total(&cand_chi, &cand_pi)?;
        let ok = match gp.kind {
            AllocationKind::CostConstrained { budget } => {
                c <= budget + 1e-9 * budget.max(1.0) && a <= alpha_raw + 1e-12
            }
            AllocationKind::PerformanceConstrained { alpha_bar } => {
                a <= alpha_bar + 1e-9 && c <= cost_raw + 1e-12
            }
        };
        if ok {
            chi = cand_chi;
            pi = cand_pi;
            snapped = true;
        }
    }

    let check = with(&chi, &pi);
    let alpha_check = bounds::alpha_u(&check)?;
    let (alpha_u_star, lambda_tilde) = if snapped {
        let lambda = TwoByTwoB::from_params(&check).spectral_radius()?;
        (alpha_check, 1.0 - lambda)
    } else {
        (alpha_gp, lt)
    };
    if alpha_check > alpha_u_star + REPORT_TOL {
        return Err(AllocationError::Inconsistent { bound: alpha_check, reported: alpha_u_star });
    }

    // zeta and eta tightened to equality, as in the relaxation argument
    let bar_m = params.bar_m();
    let wm = bounds::WeightedMeans::of(&check);
    let zeta = 1.0 / (1.0 - lambda_tilde - bar_m * wm.chi);
    let eta = 1.0 / (1.0 - lambda_tilde - bar_m * wm.pi);

    let raw_chi = read_slots(&gp.chi, sol);
    let raw_pi = read_slots(&gp.pi, sol);
    let raw = with(&raw_chi, &raw_pi);
    let rw = bounds::WeightedMeans::of(&raw);
    let gap = [
        1.0 - (1.0 / sol.value(gp.zeta) + lt + bar_m * rw.chi),
        1.0 - (1.0 / sol.value(gp.eta) + lt + bar_m * rw.pi),
    ];

    let (investments_f, investments_g) = cost.investments(&chi, &pi)?;
    let total_cost = investments_f.iter().sum::<f64>() + investments_g.iter().sum::<f64>();
    Ok(AllocationResult {
        chi_star: chi,
        pi_star: pi,
        alpha_u_star,
        alpha_u_check: alpha_check,
        lambda_tilde,
        zeta,
        eta,
        relaxation_gap: gap,
        total_cost,
        investments_f,
        investments_g,
        solver_status: sol.status.to_string(),
        solver_message: sol.message.clone(),
        newton_steps: sol.newton_steps,
        kkt_residual: sol.kkt_residual,
        feasibility_residual: sol.feasibility_residual,
        snapped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_normalization() {
        assert_eq!(cost_f(1.0, 0.01, 0.5).unwrap(), 0.0);
        assert!((cost_f(0.5, 0.01, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((cost_g(0.2, 3.0, 0.2).unwrap() - 0.8).abs() < 1e-12);
        assert!(cost_f(0.4, 0.01, 0.5).is_err());
    }

    #[test]
    fn unit_lower_bound_costs_nothing() {
        assert_eq!(cost_constant(0.5, 1.0), 0.0);
        assert_eq!(cost_f(1.0, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn c_max_examples() {
        let mut c = CostModel::uniform(2, 1.0, 1.0, 0.5, 0.5);
        assert_eq!(c_max(&c) / 2.0, 1.0);
        c = CostModel::uniform(250, 0.01, 0.01, 0.8, 0.2);
        assert!((c_max(&c) - 250.0).abs() < 1e-9);
        c = CostModel::uniform(3, 0.01, 0.01, 1.0, 1.0);
        assert_eq!(c_max(&c), 0.0);
    }

    #[test]
    fn negative_budget_is_rejected() {
        let p = ModelParams::homogeneous(3, 1, 0.5, 1.0, 1.0, 0.5, 0.5).unwrap();
        let c = CostModel::uniform(3, 1.0, 1.0, 0.5, 0.5);
        assert!(matches!(
            build_cost_constrained_gp(&p, &c, -1.0),
            Err(AllocationError::InfeasibleBudget { .. })
        ));
    }
}

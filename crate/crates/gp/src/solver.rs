//! Primal log-barrier method for the log-space convex program.
//!
//! Phase I minimizes a slack `s` with `f_k(y) <= s` to find a strictly
//! feasible point (or certify infeasibility); phase II then follows the
//! central path of `t f_0(y) - sum_k log(b - f_k(y))` with damped Newton
//! steps, solving the equality-constrained KKT system at every step.

use nalgebra::{DMatrix, DVector};

use crate::convex::{add_outer, log_transform, AffineForm, ConvexProgram, LogSumExp};
use crate::kkt::{residuals, KktReport};
use crate::{GpError, GpProblem, VarId};

/// Newton decrement threshold `lambda^2 / 2` for a centering step. Stiff
/// barrier directions need a tight value; stagnation ends centering earlier.
const NEWTON_TOL: f64 = 1e-20;
/// Below this Newton decrement a full step is taken without Armijo tests.
const QUADRATIC_REGION: f64 = 0.25;
const ARMIJO: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Largest accepted `posynomial - 1` (inequalities) or `|monomial - 1|`.
    pub feas_tol: f64,
    /// Target duality-gap proxy `#constraints * mu` and KKT residual bound.
    pub opt_tol: f64,
    /// Cap on Newton steps over both phases.
    pub max_iters: usize,
    /// Phase II stops once `#constraints * mu < gap_tol`.
    pub gap_tol: f64,
    pub mu_start: f64,
    pub mu_factor: f64,
    /// Phase I keeps `|y - y0|_inf <= phase_one_radius` so that it stays bounded.
    pub phase_one_radius: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            opt_tol: 1e-6,
            max_iters: 2000,
            gap_tol: 1e-8,
            mu_start: 1.0,
            mu_factor: 0.2,
            phase_one_radius: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIterations => "max-iterations",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    /// Variable values, indexed by [`VarId`].
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    /// `max(stationarity, complementarity)` of the log-space Lagrangian.
    pub kkt_residual: f64,
    pub feasibility_residual: f64,
    /// Multipliers of the log-space inequality constraints.
    pub ineq_duals: Vec<f64>,
    /// Multipliers of the log-space equality constraints.
    pub eq_duals: Vec<f64>,
    pub newton_steps: usize,
    /// Smallest `max_k f_k(y)` reached by phase I, when phase I ran.
    pub phase_one_value: Option<f64>,
    pub message: Option<String>,
}

impl GpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.ln()).collect()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

enum Centering {
    Converged,
    StepLimit,
    Stalled,
}

/// `t f_0 - sum_k log(bound - f_k)` restricted to `C y = d`.
struct Barrier<'a> {
    prog: &'a ConvexProgram,
    bound: f64,
    c: DMatrix<f64>,
}

impl<'a> Barrier<'a> {
    fn new(prog: &'a ConvexProgram, bound: f64) -> Self {
        Self { prog, bound, c: prog.equality_system().0 }
    }

    fn value(&self, y: &[f64], t: f64) -> Option<f64> {
        let mut acc = t * self.prog.objective.value(y);
        for f in &self.prog.inequalities {
            let slack = self.bound - f.value(y);
            if !(slack > 0.0) {
                return None;
            }
            acc -= slack.ln();
        }
        acc.is_finite().then_some(acc)
    }

    fn in_domain(&self, y: &[f64]) -> bool {
        self.prog
            .inequalities
            .iter()
            .all(|f| f.value(y) < self.bound)
    }

    fn gradient_hessian(&self, y: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let dim = self.prog.dim;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        let ev = self.prog.objective.eval(y);
        for &i in &ev.support {
            g[i] += t * ev.gradient[i];
        }
        self.prog.objective.add_hessian(&ev, t, &mut h);
        for f in &self.prog.inequalities {
            let ev = f.eval(y);
            let inv = 1.0 / (self.bound - ev.value);
            for &i in &ev.support {
                g[i] += inv * ev.gradient[i];
            }
            f.add_hessian(&ev, inv, &mut h);
            add_outer(&mut h, &ev.gradient, &ev.support, inv * inv);
        }
        (g, h)
    }

    /// Solves `[H C^T; C 0] [dy; w] = [-g; 0]`.
    fn newton_step(&self, g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
        let dim = self.prog.dim;
        let p = self.c.nrows();
        if p == 0 {
            let scale = h.diagonal().amax().max(1.0);
            let mut reg = 0.0;
            for _ in 0..8 {
                let mut hr = h.clone();
                if reg > 0.0 {
                    for i in 0..dim {
                        hr[(i, i)] += reg;
                    }
                }
                if let Some(ch) = hr.cholesky() {
                    let dy = ch.solve(&(-g));
                    if dy.iter().all(|v| v.is_finite()) {
                        return Some(dy);
                    }
                }
                reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            }
            return None;
        }
        let mut kkt = DMatrix::zeros(dim + p, dim + p);
        kkt.view_mut((0, 0), (dim, dim)).copy_from(&h);
        kkt.view_mut((dim, 0), (p, dim)).copy_from(&self.c);
        kkt.view_mut((0, dim), (dim, p)).copy_from(&self.c.transpose());
        let mut rhs = DVector::zeros(dim + p);
        rhs.rows_mut(0, dim).copy_from(&(-g));
        let sol = kkt.lu().solve(&rhs)?;
        let dy = sol.rows(0, dim).into_owned();
        dy.iter().all(|v| v.is_finite()).then_some(dy)
    }

    fn center(
        &self,
        y: &mut DVector<f64>,
        t: f64,
        steps: &mut usize,
        max_steps: usize,
    ) -> Centering {
        let mut previous = f64::INFINITY;
        loop {
            if *steps >= max_steps {
                return Centering::StepLimit;
            }
            let (g, h) = self.gradient_hessian(y.as_slice(), t);
            let Some(dy) = self.newton_step(&g, h) else {
                return Centering::Stalled;
            };
            let slope = g.dot(&dy);
            let decrement2 = (-slope).max(0.0);
            if decrement2 / 2.0 <= NEWTON_TOL
                || (decrement2.sqrt() < QUADRATIC_REGION && decrement2 > 0.5 * previous)
            {
                return Centering::Converged;
            }
            previous = decrement2;
            let mut step = 1.0;
            let mut trial = &*y + &dy;
            if decrement2.sqrt() < QUADRATIC_REGION {
                while !self.in_domain(trial.as_slice()) {
                    step *= BACKTRACK;
                    if step < MIN_STEP {
                        return Centering::Stalled;
                    }
                    trial = &*y + step * &dy;
                }
            } else {
                let Some(phi0) = self.value(y.as_slice(), t) else {
                    return Centering::Stalled;
                };
                loop {
                    match self.value(trial.as_slice(), t) {
                        Some(phi) if phi <= phi0 + ARMIJO * step * slope => break,
                        _ => {}
                    }
                    step *= BACKTRACK;
                    if step < MIN_STEP {
                        return Centering::Stalled;
                    }
                    trial = &*y + step * &dy;
                }
            }
            *y = trial;
            *steps += 1;
        }
    }
}

/// Least-norm solution of `C y = d`, or `None` when inconsistent.
fn equality_start(prog: &ConvexProgram) -> Option<DVector<f64>> {
    let (c, d) = prog.equality_system();
    if c.nrows() == 0 {
        return Some(DVector::zeros(prog.dim));
    }
    let svd = c.clone().svd(true, true);
    let y = svd.solve(&d, 1e-12).ok()?;
    let resid = (&c * &y - &d).amax();
    (resid <= 1e-9 * (1.0 + d.amax())).then_some(y)
}

/// Clamps `y` into the interval implied by single-variable, single-term
/// constraints (`c x^e <= 1`).
fn project_into_box(prog: &ConvexProgram, y: &mut DVector<f64>) {
    let mut lo = vec![f64::NEG_INFINITY; prog.dim];
    let mut hi = vec![f64::INFINITY; prog.dim];
    for f in &prog.inequalities {
        if let [AffineForm { coeffs, constant }] = f.terms.as_slice() {
            if let [(i, e)] = coeffs.as_slice() {
                let limit = -constant / e;
                if *e > 0.0 {
                    hi[*i] = hi[*i].min(limit);
                } else {
                    lo[*i] = lo[*i].max(limit);
                }
            }
        }
    }
    for i in 0..prog.dim {
        if lo[i] <= hi[i] {
            y[i] = y[i].clamp(lo[i], hi[i]);
        }
    }
}

fn max_constraint(prog: &ConvexProgram, y: &[f64]) -> f64 {
    prog.inequalities
        .iter()
        .map(|f| f.value(y))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Builds the phase I program over `(y, s)`.
fn phase_one_program(prog: &ConvexProgram, y0: &DVector<f64>, radius: f64) -> ConvexProgram {
    let s = prog.dim;
    let mut inequalities: Vec<LogSumExp> = prog
        .inequalities
        .iter()
        .map(|f| LogSumExp {
            terms: f
                .terms
                .iter()
                .map(|t| {
                    let mut coeffs = t.coeffs.clone();
                    coeffs.push((s, -1.0));
                    AffineForm { coeffs, constant: t.constant }
                })
                .collect(),
        })
        .collect();
    // s >= -1 keeps the slack bounded below.
    inequalities.push(LogSumExp {
        terms: vec![AffineForm { coeffs: vec![(s, -1.0)], constant: -1.0 }],
    });
    for i in 0..prog.dim {
        inequalities.push(LogSumExp {
            terms: vec![AffineForm { coeffs: vec![(i, 1.0)], constant: -y0[i] - radius }],
        });
        inequalities.push(LogSumExp {
            terms: vec![AffineForm { coeffs: vec![(i, -1.0)], constant: y0[i] - radius }],
        });
    }
    ConvexProgram {
        dim: prog.dim + 1,
        objective: LogSumExp {
            terms: vec![AffineForm { coeffs: vec![(s, 1.0)], constant: 0.0 }],
        },
        inequalities,
        equalities: prog
            .equalities
            .iter()
            .cloned()
            .collect(),
    }
}

/// Outcome of phase I: a start point and the constraint bound for phase II.
enum PhaseOne {
    Start { y: DVector<f64>, bound: f64, best: Option<f64> },
    Infeasible { best: f64 },
    Failed { message: String },
}

fn phase_one(
    prog: &ConvexProgram,
    opts: &SolverOptions,
    steps: &mut usize,
) -> PhaseOne {
    let Some(mut y0) = equality_start(prog) else {
        return PhaseOne::Infeasible { best: f64::INFINITY };
    };
    if prog.equalities.is_empty() {
        project_into_box(prog, &mut y0);
    }
    if prog.inequalities.is_empty() {
        return PhaseOne::Start { y: y0, bound: 0.0, best: None };
    }
    let tau = opts.feas_tol.ln_1p();
    let start = max_constraint(prog, y0.as_slice());
    if start < -tau {
        return PhaseOne::Start { y: y0, bound: 0.0, best: None };
    }

    let aux = phase_one_program(prog, &y0, opts.phase_one_radius);
    let mut z = DVector::zeros(aux.dim);
    z.rows_mut(0, prog.dim).copy_from(&y0);
    z[prog.dim] = (start + 1.0).max(0.0);
    let barrier = Barrier::new(&aux, 0.0);
    let m = aux.inequalities.len() as f64;
    let mut mu = opts.mu_start;
    let mut best = f64::INFINITY;
    loop {
        match barrier.center(&mut z, 1.0 / mu, steps, opts.max_iters) {
            Centering::Converged | Centering::Stalled => {}
            Centering::StepLimit => {
                return PhaseOne::Failed {
                    message: format!("phase I hit the step limit at mu = {mu:.3e}"),
                }
            }
        }
        let y = z.rows(0, prog.dim).into_owned();
        best = best.min(max_constraint(prog, y.as_slice()));
        if best < -1e-2 || m * mu < tau / 4.0 {
            break;
        }
        mu *= opts.mu_factor;
    }
    let y = z.rows(0, prog.dim).into_owned();
    let achieved = max_constraint(prog, y.as_slice());
    if achieved > tau {
        return PhaseOne::Infeasible { best: achieved };
    }
    let bound = if achieved < -tau { 0.0 } else { achieved + (tau - achieved) / 2.0 };
    PhaseOne::Start { y, bound, best: Some(achieved) }
}

/// Solves `problem` by the barrier method in log space.
pub fn solve(problem: &GpProblem, opts: &SolverOptions) -> Result<GpSolution, GpError> {
    let prog = log_transform(problem)?;
    let mut steps = 0usize;
    let (mut y, bound, phase_one_value) = match phase_one(&prog, opts, &mut steps) {
        PhaseOne::Start { y, bound, best } => (y, bound, best),
        PhaseOne::Infeasible { best } => {
            let y0 = equality_start(&prog).unwrap_or_else(|| DVector::zeros(prog.dim));
            return Ok(finish(
                problem,
                &prog,
                &y0,
                SolveStatus::Infeasible,
                opts,
                steps,
                0.0,
                0.0,
                Some(best),
                Some(format!("minimum constraint violation {best:.3e} in log space")),
            ));
        }
        PhaseOne::Failed { message } => {
            let y0 = equality_start(&prog).unwrap_or_else(|| DVector::zeros(prog.dim));
            return Ok(finish(
                problem,
                &prog,
                &y0,
                SolveStatus::MaxIterations,
                opts,
                steps,
                0.0,
                0.0,
                None,
                Some(message),
            ));
        }
    };

    let barrier = Barrier::new(&prog, bound);
    let m = prog.inequalities.len() as f64;
    let mut mu = if m == 0.0 { 1.0 } else { opts.mu_start };
    let mut status = SolveStatus::Optimal;
    let mut message = None;
    loop {
        match barrier.center(&mut y, 1.0 / mu, &mut steps, opts.max_iters) {
            Centering::Converged => {}
            Centering::Stalled => {
                // Line search exhaustion near the end of the path is harmless;
                // the residual check below decides.
                message = Some(format!("line search stalled at mu = {mu:.3e}"));
            }
            Centering::StepLimit => {
                status = SolveStatus::MaxIterations;
                message = Some(format!("Newton step limit reached at mu = {mu:.3e}"));
                break;
            }
        }
        if m * mu < opts.gap_tol {
            break;
        }
        mu *= opts.mu_factor;
    }
    Ok(finish(
        problem,
        &prog,
        &y,
        status,
        opts,
        steps,
        mu,
        bound,
        phase_one_value,
        message,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &GpProblem,
    prog: &ConvexProgram,
    y: &DVector<f64>,
    status: SolveStatus,
    opts: &SolverOptions,
    steps: usize,
    mu: f64,
    bound: f64,
    phase_one_value: Option<f64>,
    mut message: Option<String>,
) -> GpSolution {
    let ys = y.as_slice();
    let ineq_duals: Vec<f64> = if status == SolveStatus::Infeasible {
        vec![0.0; prog.inequalities.len()]
    } else {
        prog.inequalities
            .iter()
            .map(|f| mu / (bound - f.value(ys)).max(f64::MIN_POSITIVE))
            .collect()
    };
    let mut eq_duals = equality_multipliers(prog, ys, &ineq_duals);
    let mut report: KktReport = residuals(prog, ys, &ineq_duals, &eq_duals);
    let mut ineq_duals = ineq_duals;
    if status != SolveStatus::Infeasible {
        if let Some((lam, nu)) = refine_duals(prog, ys, &ineq_duals, mu) {
            let refined = residuals(prog, ys, &lam, &nu);
            if refined.stationarity.max(refined.complementarity)
                < report.stationarity.max(report.complementarity)
            {
                ineq_duals = lam;
                eq_duals = nu;
                report = refined;
            }
        }
    }
    let values: Vec<f64> = ys.iter().map(|v| v.exp()).collect();
    let objective_value = problem.objective.evaluate(&values).unwrap_or(f64::NAN);
    let kkt_residual = report.stationarity.max(report.complementarity);
    let mut status = status;
    if status == SolveStatus::Optimal
        && !(report.feasibility <= opts.feas_tol && kkt_residual <= opts.opt_tol)
    {
        status = SolveStatus::MaxIterations;
        message = Some(format!(
            "residuals above tolerance: feasibility {:.3e}, kkt {:.3e}{}",
            report.feasibility,
            kkt_residual,
            message.map(|m| format!(" ({m})")).unwrap_or_default()
        ));
    }
    GpSolution {
        values,
        objective_value,
        status,
        kkt_residual,
        feasibility_residual: report.feasibility,
        ineq_duals,
        eq_duals,
        newton_steps: steps,
        phase_one_value,
        message,
    }
}

/// Least-squares multipliers `nu` minimizing the stationarity residual.
fn equality_multipliers(prog: &ConvexProgram, y: &[f64], ineq_duals: &[f64]) -> Vec<f64> {
    let (c, _) = prog.equality_system();
    if c.nrows() == 0 {
        return Vec::new();
    }
    let mut r = DVector::from_vec(prog.objective.eval(y).gradient);
    for (f, &lam) in prog.inequalities.iter().zip(ineq_duals) {
        let ev = f.eval(y);
        for &i in &ev.support {
            r[i] += lam * ev.gradient[i];
        }
    }
    let ct = c.transpose();
    let svd = ct.svd(true, true);
    match svd.solve(&(-r), 1e-12) {
        Ok(nu) => nu.iter().copied().collect(),
        Err(_) => vec![0.0; c.nrows()],
    }
}

/// Multipliers of the near-active constraints (barrier estimate above
/// `ACTIVE_RATIO * mu`) refitted by least squares on the stationarity
/// condition. The barrier estimates `mu / slack` lose accuracy when slacks
/// approach rounding level; any nonnegative refit is an equally valid
/// certificate. Returns `None` if the refit has a negative multiplier.
fn refine_duals(prog: &ConvexProgram, y: &[f64], duals: &[f64], mu: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    const ACTIVE_RATIO: f64 = 1e3;
    let active: Vec<usize> = (0..duals.len()).filter(|&k| duals[k] > ACTIVE_RATIO * mu).collect();
    let (c, _) = prog.equality_system();
    let cols = active.len() + c.nrows();
    if cols == 0 {
        return None;
    }
    let dim = prog.dim;
    let mut a = DMatrix::zeros(dim, cols);
    for (col, &k) in active.iter().enumerate() {
        let ev = prog.inequalities[k].eval(y);
        for &i in &ev.support {
            a[(i, col)] = ev.gradient[i];
        }
    }
    for r in 0..c.nrows() {
        for i in 0..dim {
            a[(i, active.len() + r)] = c[(r, i)];
        }
    }
    let rhs = -DVector::from_vec(prog.objective.eval(y).gradient);
    let x = a.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let mut lam = vec![0.0; duals.len()];
    for (col, &k) in active.iter().enumerate() {
        if !(x[col] >= 0.0) {
            return None;
        }
        lam[k] = x[col];
    }
    let nu = (0..c.nrows()).map(|r| x[active.len() + r]).collect();
    Some((lam, nu))
}

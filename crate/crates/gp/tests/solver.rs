use adsis_gp::{
    log_transform, solve, verify_kkt, GpProblem, GpSolution, Monomial, Posynomial, SolveStatus,
    SolverOptions, VarId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mono(c: f64, exps: &[(VarId, f64)]) -> Monomial {
    Monomial::new(c, exps).unwrap()
}

fn solved(p: &GpProblem) -> GpSolution {
    let s = solve(p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal, "{:?}", s.message);
    s
}

#[test]
fn single_active_constraint() {
    // minimize x s.t. 2/x <= 1
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    p.set_objective(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(2.0, &[(x, -1.0)]));
    let s = solved(&p);
    assert!((s.value(x) - 2.0).abs() < 1e-6, "x = {}", s.value(x));
    assert!((s.objective_value - 2.0).abs() < 1e-6);
    let r = verify_kkt(&p, &s).unwrap();
    assert!(r.feasibility <= 1e-8 && r.stationarity <= 1e-8 && r.complementarity <= 1e-6);
}

#[test]
fn box_active_optimum() {
    // minimize 1/(xy) s.t. x <= 1, y <= 1
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    let y = p.add_variable("y");
    p.set_objective(mono(1.0, &[(x, -1.0), (y, -1.0)]));
    p.add_inequality(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(1.0, &[(y, 1.0)]));
    let s = solved(&p);
    assert!((s.value(x) - 1.0).abs() < 1e-6);
    assert!((s.value(y) - 1.0).abs() < 1e-6);
    assert!((s.objective_value - 1.0).abs() < 1e-6);
}

#[test]
fn monomial_equality_is_respected() {
    // minimize x + y s.t. x y = 4 -> x = y = 2
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    let y = p.add_variable("y");
    p.set_objective(Posynomial::from_terms([mono(1.0, &[(x, 1.0)]), mono(1.0, &[(y, 1.0)])]));
    p.add_equality(mono(0.25, &[(x, 1.0), (y, 1.0)])).unwrap();
    p.add_inequality(mono(0.01, &[(x, 1.0)]));
    let s = solved(&p);
    assert!((s.value(x) - 2.0).abs() < 1e-5);
    assert!((s.value(y) - 2.0).abs() < 1e-5);
    assert!((s.objective_value - 4.0).abs() < 1e-5);
}

#[test]
fn infeasible_problem_is_certified() {
    // x <= 1 and 2/x <= 1 cannot both hold.
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    p.set_objective(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(2.0, &[(x, -1.0)]));
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Infeasible);
    assert!(s.phase_one_value.unwrap() > 0.1);
}

#[test]
fn feasible_set_without_interior_is_solved_within_tolerance() {
    // x <= 1 and 1/x <= 1 pin x = 1.
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    let y = p.add_variable("y");
    p.set_objective(Posynomial::from_terms([mono(1.0, &[(y, 1.0)]), mono(1.0, &[(y, -1.0), (x, 1.0)])]));
    p.add_inequality(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(1.0, &[(x, -1.0)]));
    let s = solved(&p);
    assert!((s.value(x) - 1.0).abs() < 1e-7);
    assert!((s.value(y) - 1.0).abs() < 1e-4);
    assert!(s.feasibility_residual <= 1e-8);
}

#[test]
fn stationarity_detects_perturbed_point() {
    // minimize x + y s.t. 1/(xy) <= 1: optimum x = y = 1.
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    let y = p.add_variable("y");
    p.set_objective(Posynomial::from_terms([mono(1.0, &[(x, 1.0)]), mono(1.0, &[(y, 1.0)])]));
    p.add_inequality(mono(1.0, &[(x, -1.0), (y, -1.0)]));
    let s = solved(&p);
    let at_opt = verify_kkt(&p, &s).unwrap();
    assert!(at_opt.stationarity <= 1e-8, "{at_opt:?}");
    let mut moved = s.clone();
    moved.values[0] *= 1.01;
    let off = verify_kkt(&p, &moved).unwrap();
    assert!(off.stationarity > 1e-4, "{off:?}");
}

#[test]
fn infeasible_point_reports_positive_residual() {
    let mut p = GpProblem::new();
    let x = p.add_variable("x");
    p.set_objective(mono(1.0, &[(x, 1.0)]));
    p.add_inequality(mono(2.0, &[(x, -1.0)]));
    let candidate = GpSolution {
        values: vec![1.0],
        objective_value: 1.0,
        status: SolveStatus::MaxIterations,
        kkt_residual: f64::NAN,
        feasibility_residual: f64::NAN,
        ineq_duals: vec![],
        eq_duals: vec![],
        newton_steps: 0,
        phase_one_value: None,
        message: None,
    };
    let r = verify_kkt(&p, &candidate).unwrap();
    assert!((r.feasibility - 1.0).abs() < 1e-12);
}

/// Three variables in [0.1, 10], five posynomial constraints that are strictly
/// satisfied at x = 1, and an objective pushing variables against them.
fn random_gp(rng: &mut ChaCha8Rng) -> GpProblem {
    let mut p = GpProblem::new();
    let vars: Vec<VarId> = (0..3).map(|i| p.add_variable(format!("x{i}"))).collect();
    for &v in &vars {
        p.add_inequality(mono(0.1, &[(v, 1.0)]));
        p.add_inequality(mono(0.1, &[(v, -1.0)]));
    }
    let random_exps = |rng: &mut ChaCha8Rng| -> Vec<(VarId, f64)> {
        vars.iter().map(|&v| (v, rng.random_range(-1.5..1.5))).collect()
    };
    let mut objective = Posynomial::new();
    for _ in 0..3 {
        let exps = random_exps(rng);
        objective.push(mono(rng.random_range(0.5..2.0), &exps));
    }
    // One term that decreases in every variable keeps the optimum off the box.
    objective.push(mono(1.0, &vars.iter().map(|&v| (v, -0.7)).collect::<Vec<_>>()));
    p.set_objective(objective);
    for _ in 0..5 {
        let terms: Vec<Monomial> = (0..rng.random_range(1..4))
            .map(|_| {
                let exps = random_exps(rng);
                mono(rng.random_range(0.1..1.0), &exps)
            })
            .collect();
        let at_one: f64 = terms.iter().map(|t| t.coeff()).sum();
        let scale = rng.random_range(0.3..0.9) / at_one;
        p.add_inequality(Posynomial::from_terms(terms).scaled(scale).unwrap());
    }
    p
}

/// Brute-force minimum over a log-space grid, refined by zooming in around
/// the best feasible point. No derivatives, no solver.
fn grid_oracle(p: &GpProblem, first_axis: usize, zoom_axis: usize, zooms: usize) -> f64 {
    let feasible = |y: &[f64]| {
        let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        p.inequalities
            .iter()
            .all(|c| c.evaluate(&x).unwrap() <= 1.0)
            .then(|| p.objective.evaluate(&x).unwrap())
    };
    let dim = p.num_vars();
    let mut lo = vec![(0.1f64).ln(); dim];
    let mut hi = vec![(10.0f64).ln(); dim];
    let mut best = (f64::INFINITY, vec![0.0; dim]);
    for level in 0..=zooms {
        let points_per_axis = if level == 0 { first_axis } else { zoom_axis };
        let step: Vec<f64> = (0..dim)
            .map(|d| (hi[d] - lo[d]) / (points_per_axis - 1) as f64)
            .collect();
        let mut idx = vec![0usize; dim];
        loop {
            let y: Vec<f64> = (0..dim).map(|d| lo[d] + idx[d] as f64 * step[d]).collect();
            if let Some(v) = feasible(&y) {
                if v < best.0 {
                    best = (v, y);
                }
            }
            let mut d = 0;
            while d < dim {
                idx[d] += 1;
                if idx[d] < points_per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        for d in 0..dim {
            lo[d] = best.1[d] - 3.0 * step[d];
            hi[d] = best.1[d] + 3.0 * step[d];
        }
    }
    best.0
}

#[test]
fn random_gps_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..5 {
        let p = random_gp(&mut rng);
        let s = solved(&p);
        let oracle = grid_oracle(&p, 100, 25, 8);
        let rel = (s.objective_value - oracle) / oracle;
        assert!(rel.abs() <= 1e-3, "case {case}: solver {} oracle {oracle}", s.objective_value);
        // Feasible grid points bound the optimum from above.
        assert!(s.objective_value <= oracle * (1.0 + 1e-6), "case {case}: solver {} oracle {oracle}", s.objective_value);
        assert!(s.feasibility_residual <= 1e-8, "case {case}: {}", s.feasibility_residual);
    }
}

#[test]
fn objective_scaling_leaves_argmin_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let p = random_gp(&mut rng);
        let mut q = p.clone();
        q.objective = q.objective.scaled(37.5).unwrap();
        let a = solved(&p);
        let b = solved(&q);
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() <= 1e-6 * u.max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn transformed_constraints_are_midpoint_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let p = random_gp(&mut rng);
        let cp = log_transform(&p).unwrap();
        for f in &cp.inequalities {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            assert!(f.value(&mid) <= 0.5 * (f.value(&u) + f.value(&v)) + 1e-12);
        }
    }
}

#[test]
fn lse_gradient_and_hessian_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for _ in 0..20 {
        let p = random_gp(&mut rng);
        let cp = log_transform(&p).unwrap();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        for f in cp.inequalities.iter().chain(std::iter::once(&cp.objective)) {
            let ev = f.eval(&y);
            let hess = f.hessian(&y);
            for d in 0..3 {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[d] += h;
                ym[d] -= h;
                let fd = (f.value(&yp) - f.value(&ym)) / (2.0 * h);
                let g = ev.gradient[d];
                assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "grad {fd} vs {g}");
                let gp = f.eval(&yp).gradient;
                let gm = f.eval(&ym).gradient;
                for e in 0..3 {
                    let fd2 = (gp[e] - gm[e]) / (2.0 * h);
                    assert!((fd2 - hess[(e, d)]).abs() <= 1e-5 * hess[(e, d)].abs().max(1.0));
                }
            }
        }
    }
}

use adsis_core::allocation::{
    build_cost_constrained_gp, build_performance_constrained_gp, c_max, cost_f, cost_g, solve_allocation,
    AllocationKind,
};
use adsis_core::bounds::alpha_u;
use adsis_core::gp::SolverOptions;
use adsis_core::model::random_params;
use adsis_core::{ActivityDistribution, AllocationError, CostModel, ModelParams, Seed};

fn small_instance(n: usize, m: usize, seed: u64) -> ModelParams {
    let dist = ActivityDistribution::Uniform { lo: 0.0, hi: 1.0 };
    random_params(n, m, &dist, 0.3, 0.4, Seed(seed)).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn golden_cost_value() {
    let direct = 0.5 * (0.7f64.powf(-0.01) - 1.0) / (0.5f64.powf(-0.01) - 1.0);
    let v = cost_f(0.7, 0.01, 0.5).unwrap();
    assert!((v - direct).abs() < 1e-15);
    assert!((v - 0.256_853_723_307_335_75).abs() < 1e-12, "{v}");
    assert_eq!(cost_g(0.7, 0.01, 0.5).unwrap(), v);
}

#[test]
fn built_gps_have_nonnegative_coefficients() {
    let p = small_instance(4, 2, 1);
    let c = CostModel::uniform(4, 0.5, 0.5, 0.3, 0.3);
    for gp in [
        build_cost_constrained_gp(&p, &c, 1.0).unwrap(),
        build_performance_constrained_gp(&p, &c, alpha_u(&p).unwrap()).unwrap(),
    ] {
        let text = gp.problem.to_text();
        assert!(!text.contains(" -"), "{text}");
    }
}

#[test]
fn full_budget_reaches_lower_corner() {
    let p = small_instance(6, 2, 2);
    let c = CostModel::uniform(6, 0.01, 0.01, 0.8, 0.2);
    let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget: c_max(&c) }, &opts()).unwrap();
    for i in 0..6 {
        assert!((r.chi_star[i] - 0.8).abs() < 1e-4, "{:?}", r.chi_star);
        assert!((r.pi_star[i] - 0.2).abs() < 1e-4, "{:?}", r.pi_star);
        assert!((r.investment(i) - 1.0).abs() < 1e-3);
    }
}

#[test]
fn zero_budget_keeps_unit_rates() {
    let p = small_instance(5, 1, 3);
    let c = CostModel::uniform(5, 0.5, 0.5, 0.5, 0.5);
    let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget: 0.0 }, &opts()).unwrap();
    assert!(r.total_cost < 1e-6, "{}", r.total_cost);
    assert!(r.chi_star.iter().chain(&r.pi_star).all(|&x| x > 0.999));
}

#[test]
fn loose_performance_target_costs_nothing() {
    let p = small_instance(6, 2, 4);
    let c = CostModel::uniform(6, 0.01, 0.01, 0.8, 0.2);
    let target = alpha_u(&p.without_adaptation()).unwrap();
    let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar: target }, &opts()).unwrap();
    assert!(r.total_cost < 1e-6, "{}", r.total_cost);
}

#[test]
fn tight_performance_target_costs_the_corner() {
    let n = 4;
    let p = small_instance(n, 2, 5);
    let c = CostModel::uniform(n, 0.5, 0.5, 0.4, 0.4);
    let corner = ModelParams { chi: c.chi_lower.clone(), pi: c.pi_lower.clone(), ..p.clone() };
    let target = alpha_u(&corner).unwrap();
    let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar: target }, &opts()).unwrap();
    assert!((r.total_cost - c_max(&c)).abs() < 1e-3 * c_max(&c), "{} vs {}", r.total_cost, c_max(&c));
}

#[test]
fn unreachable_performance_target_is_reported() {
    let p = small_instance(4, 2, 6);
    let c = CostModel::uniform(4, 0.5, 0.5, 0.4, 0.4);
    let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar: 1.0 - p.delta }, &opts());
    assert!(matches!(r, Err(AllocationError::PerformanceInfeasible { .. })), "{r:?}");
}

#[test]
fn solutions_are_consistent_with_the_bound() {
    let n = 8;
    let p = small_instance(n, 3, 7);
    let c = CostModel::uniform(n, 0.3, 0.7, 0.3, 0.5);
    let budget = c_max(&c) / 3.0;
    let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget }, &opts()).unwrap();
    assert!(r.alpha_u_check <= r.alpha_u_star + 1e-6);
    assert!(r.total_cost <= budget + 1e-6);
    let sum: f64 = r.investments_f.iter().chain(&r.investments_g).sum();
    assert!((sum - r.total_cost).abs() < 1e-9);
    for i in 0..n {
        assert!(r.chi_star[i] >= c.chi_lower[i] && r.chi_star[i] <= 1.0);
        assert!(r.pi_star[i] >= c.pi_lower[i] && r.pi_star[i] <= 1.0);
    }
    assert!(r.relaxation_gap.iter().all(|g| g.abs() < 1e-6), "{:?}", r.relaxation_gap);

    let alpha_bar = (r.alpha_u_star + alpha_u(&p.without_adaptation()).unwrap()) / 2.0;
    let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar }, &opts()).unwrap();
    assert!(r.alpha_u_check <= alpha_bar + 1e-6);
    assert!(r.relaxation_gap.iter().all(|g| g.abs() < 1e-6), "{:?}", r.relaxation_gap);
}

#[test]
fn budget_ladder_is_monotone() {
    let n = 6;
    let p = small_instance(n, 2, 8);
    let c = CostModel::uniform(n, 0.2, 0.2, 0.5, 0.3);
    let mut last = f64::INFINITY;
    for k in 0..=6 {
        let budget = c_max(&c) * k as f64 / 6.0;
        let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget }, &opts()).unwrap();
        assert!(r.alpha_u_star <= last + 1e-7, "budget {budget}: {} > {last}", r.alpha_u_star);
        last = r.alpha_u_star;
    }
}

#[test]
fn performance_ladder_is_monotone() {
    let n = 6;
    let p = small_instance(n, 2, 9);
    let c = CostModel::uniform(n, 0.2, 0.2, 0.5, 0.3);
    let corner = ModelParams { chi: c.chi_lower.clone(), pi: c.pi_lower.clone(), ..p.clone() };
    let lo = alpha_u(&corner).unwrap();
    let hi = alpha_u(&p.without_adaptation()).unwrap();
    let mut last = f64::INFINITY;
    for k in 0..=6 {
        let alpha_bar = lo + (hi - lo) * k as f64 / 6.0;
        let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar }, &opts()).unwrap();
        assert!(r.total_cost <= last + 1e-6, "alpha_bar {alpha_bar}: {} > {last}", r.total_cost);
        last = r.total_cost;
    }
}

#[test]
fn pinned_coordinates_are_eliminated() {
    let n = 4;
    let p = small_instance(n, 1, 10);
    let mut c = CostModel::uniform(n, 0.5, 0.5, 0.5, 0.5);
    c.chi_lower[1] = 1.0;
    c.pi_lower[2] = 0.7;
    c.pi_upper[2] = 0.7;
    let budget = c_max(&c) / 2.0;
    let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget }, &opts()).unwrap();
    assert_eq!(r.chi_star[1], 1.0);
    assert_eq!(r.investments_f[1], 0.0);
    assert_eq!(r.pi_star[2], 0.7);
}

/// Log-spaced grid over `[lo, 1]` with `k` points.
fn grid(lo: f64, k: usize) -> Vec<f64> {
    (0..k).map(|j| (lo.ln() * (1.0 - j as f64 / (k - 1) as f64)).exp()).collect()
}

#[test]
fn n3_cost_constrained_matches_grid_oracle() {
    let n = 3;
    let dist = ActivityDistribution::Uniform { lo: 0.0, hi: 1.0 };
    let p = random_params(n, 1, &dist, 0.5, 0.3, Seed(11)).unwrap();
    let c = CostModel::uniform(n, 0.5, 0.5, 0.3, 0.3);
    let budget = c_max(&c) / 4.0;
    let r = solve_allocation(&p, &c, AllocationKind::CostConstrained { budget }, &opts()).unwrap();

    let g = grid(0.3, 20);
    let fc: Vec<f64> = g.iter().map(|&x| cost_f(x, 0.5, 0.3).unwrap()).collect();
    let mut best = f64::INFINITY;
    let mut q = p.clone();
    for idx in 0..20usize.pow(6) {
        let mut k = idx;
        let mut ix = [0usize; 6];
        for slot in ix.iter_mut() {
            *slot = k % 20;
            k /= 20;
        }
        let cost: f64 = ix.iter().map(|&j| fc[j]).sum();
        if cost > budget {
            continue;
        }
        for i in 0..n {
            q.chi[i] = g[ix[i]];
            q.pi[i] = g[ix[3 + i]];
        }
        best = best.min(alpha_u(&q).unwrap());
    }
    assert!(r.alpha_u_star <= best * (1.0 + 1e-3), "{} vs {best}", r.alpha_u_star);
    assert!(r.alpha_u_star >= best * (1.0 - 1e-3), "{} vs {best}", r.alpha_u_star);
}

#[test]
fn n3_performance_constrained_matches_grid_oracle() {
    let n = 3;
    let dist = ActivityDistribution::Uniform { lo: 0.0, hi: 1.0 };
    let p = random_params(n, 1, &dist, 0.5, 0.3, Seed(12)).unwrap();
    let c = CostModel::uniform(n, 0.5, 0.5, 0.3, 0.3);
    let corner = ModelParams { chi: c.chi_lower.clone(), pi: c.pi_lower.clone(), ..p.clone() };
    let lo = alpha_u(&corner).unwrap();
    let hi = alpha_u(&p).unwrap().max(alpha_u(&p.without_adaptation()).unwrap());
    let alpha_bar = lo + 0.4 * (hi - lo);
    let r = solve_allocation(&p, &c, AllocationKind::PerformanceConstrained { alpha_bar }, &opts()).unwrap();

    let g = grid(0.3, 20);
    let fc: Vec<f64> = g.iter().map(|&x| cost_f(x, 0.5, 0.3).unwrap()).collect();
    let mut best = f64::INFINITY;
    let mut q = p.clone();
    for idx in 0..20usize.pow(6) {
        let mut k = idx;
        let mut ix = [0usize; 6];
        for slot in ix.iter_mut() {
            *slot = k % 20;
            k /= 20;
        }
        let cost: f64 = ix.iter().map(|&j| fc[j]).sum();
        if cost >= best {
            continue;
        }
        for i in 0..n {
            q.chi[i] = g[ix[i]];
            q.pi[i] = g[ix[3 + i]];
        }
        if alpha_u(&q).unwrap() <= alpha_bar {
            best = cost;
        }
    }
    // The grid only bounds the optimum from above; its resolution sets the gap.
    assert!(r.total_cost <= best + 1e-6, "{} vs {best}", r.total_cost);
    assert!(r.total_cost >= best * 0.9, "{} vs {best}", r.total_cost);
}

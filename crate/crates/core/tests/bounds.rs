use std::cmp::Ordering;

use adsis_core::bounds::{
    alpha_u, alpha_upper, build_mean_field_matrix, characteristic_residual, check_lambda_inequalities,
    correlation_comparison, kappa, kappa0, propagate_upper_bound, rho_a_reduction_check, sis_alpha_u,
    sis_alpha_u_large_n, RateMeans, TwoByTwoB, WeightedMeans,
};
use adsis_core::model::random_params;
use adsis_core::{ActivityDistribution, BoundsError, ModelParams, Seed, StreamDomain};
use rand::seq::SliceRandom;
use rand::Rng;

fn unit_params(n: usize, m: usize, seed: u64) -> ModelParams {
    let mut rng = Seed(seed).stream(StreamDomain::Auxiliary, 0);
    let beta = rng.random_range(0.01..1.0);
    let delta = rng.random_range(0.01..1.0);
    let dist = ActivityDistribution::Uniform { lo: 0.0, hi: 1.0 };
    random_params(n, m, &dist, beta, delta, Seed(seed)).unwrap()
}

fn dense_rho_b(p: &ModelParams) -> f64 {
    TwoByTwoB::from_params(p)
        .matrix()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[test]
fn reduction_identity_holds() {
    for (k, n) in [2usize, 3, 10, 50, 120, 200].into_iter().enumerate() {
        let p = unit_params(n, 1 + (n - 1) / 3, k as u64);
        let (lhs, rhs) = rho_a_reduction_check(&p).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs, "n={n}: {lhs} vs {rhs}");
    }
    let p = ModelParams::homogeneous(2, 1, 0.4, 0.6, 0.6, 0.5, 0.5).unwrap();
    let (lhs, rhs) = rho_a_reduction_check(&p).unwrap();
    assert!((lhs - rhs).abs() <= 1e-12 * rhs);
}

#[test]
fn reduction_identity_with_tiny_rates() {
    for scale in [1e-2, 1e-4, 1e-6] {
        let mut p = unit_params(20, 3, 77);
        p.a.iter_mut().for_each(|a| *a *= scale);
        let (lhs, rhs) = rho_a_reduction_check(&p).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs, "scale {scale}: {lhs} vs {rhs}");
    }
}

#[test]
fn kappa_matches_eigensolve() {
    for seed in 0..200 {
        let p = unit_params(4, 1 + seed as usize % 3, seed);
        let k = kappa(&p).unwrap() * p.bar_m();
        let d = dense_rho_b(&p);
        assert!((k - d).abs() <= 1e-12 * d, "seed {seed}: {k} vs {d}");
    }
}

#[test]
fn homogeneous_closed_form() {
    let p = ModelParams::homogeneous(11, 2, 0.5, 1.0, 1.0, 0.4, 0.3).unwrap();
    let k = kappa(&p).unwrap();
    assert!((k - 0.95).abs() < 1e-12);
    assert!((kappa0(&p).unwrap() - 0.95).abs() < 1e-12);
    let expect = 1.0 - 0.3 + 0.95 * 0.2 * 11.0 * 0.4;
    assert!((alpha_u(&p).unwrap() - expect).abs() < 1e-12);
    assert!((sis_alpha_u(&p).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn kappa0_is_the_unit_adaptation_case() {
    for seed in 0..50 {
        let p = unit_params(30, 4, seed);
        let k0 = kappa0(&p).unwrap();
        let k = kappa(&p.without_adaptation()).unwrap();
        assert!((k0 - k).abs() < 1e-12);
    }
}

#[test]
fn zero_beta_bound_is_one_minus_delta() {
    let mut p = unit_params(25, 5, 3);
    p.beta = 0.0;
    assert_eq!(alpha_u(&p).unwrap(), 1.0 - p.delta);
    let f = build_mean_field_matrix(&p);
    let s = propagate_upper_bound(&f, &vec![0.5; 25], 4).unwrap();
    for (t, v) in s.iter().enumerate() {
        assert!(v.iter().all(|&x| (x - 0.5 * (1.0 - p.delta).powi(t as i32)).abs() < 1e-15));
    }
    assert_eq!(propagate_upper_bound(&f, &vec![0.5; 25], 0).unwrap().len(), 1);
}

#[test]
fn three_way_consistency_and_root_residuals() {
    for seed in 0..100 {
        let n = 2 + seed as usize % 60;
        let p = unit_params(n, 1 + seed as usize % (n - 1), seed);
        let r = alpha_upper(&p).unwrap();
        assert!((r.rho_a - n as f64 * r.rho_b).abs() <= 1e-9 * r.rho_a);
        let means = RateMeans::of(&p);
        let (l1, l2) = TwoByTwoB::from_means(means).roots().unwrap();
        assert!(characteristic_residual(means, l1).abs() <= 1e-12);
        assert!(characteristic_residual(means, l2).abs() <= 1e-12);
    }
}

#[test]
fn growth_factor_approaches_rho_f() {
    let p = unit_params(50, 5, 17);
    let f = build_mean_field_matrix(&p);
    let s = f.propagate(&vec![1.0; 50], 501).unwrap();
    let norm = |v: &Vec<f64>| v.iter().sum::<f64>();
    let ratio = norm(&s[501]) / norm(&s[500]);
    let rho_f = alpha_upper(&p).unwrap().rho_f;
    assert!((ratio - rho_f).abs() <= 1e-6, "{ratio} vs {rho_f}");
}

#[test]
fn lambda_inequality_sandwich() {
    for seed in 0..200 {
        let p = unit_params(3 + seed as usize % 40, 1, seed);
        let rho = TwoByTwoB::from_params(&p).spectral_radius().unwrap();
        assert!(check_lambda_inequalities(&p, rho * (1.0 + 1e-6)).iter().all(|&b| b));
        assert!(!check_lambda_inequalities(&p, rho * (1.0 - 1e-6)).iter().all(|&b| b));
        let m = RateMeans::of(&p);
        let c = check_lambda_inequalities(&p, m.phi.max(m.psi));
        assert!(!c[1] || !c[2]);
    }
}

#[test]
fn large_population_limit() {
    let n = 100_000;
    let dist = ActivityDistribution::CASE_1;
    let a = dist.sample(n, &mut Seed(5).stream(StreamDomain::Activities, 0)).unwrap();
    let p = ModelParams::new(2, a, vec![1.0; n], vec![1.0; n], 0.8, 0.5).unwrap();
    let exact = sis_alpha_u(&p).unwrap();
    let limit = sis_alpha_u_large_n(&p);
    assert!((exact - limit).abs() <= 0.01 * 2.0 * 0.8, "{exact} vs {limit}");
}

#[test]
fn anticorrelated_pairing_gives_smaller_bound() {
    let base = |chi: [f64; 2], pi: [f64; 2]| ModelParams::new(1, vec![0.4, 0.4], chi.to_vec(), pi.to_vec(), 0.5, 0.5).unwrap();
    let anti = base([0.2, 0.8], [0.8, 0.2]);
    let corr = base([0.2, 0.8], [0.2, 0.8]);
    assert_eq!(correlation_comparison(&anti, &corr).unwrap(), Ordering::Less);
    assert!(alpha_u(&anti).unwrap() < alpha_u(&corr).unwrap());
    assert_eq!(correlation_comparison(&anti, &anti).unwrap(), Ordering::Equal);
}

#[test]
fn mean_preserving_swaps_follow_correlation() {
    let mut rng = Seed(99).stream(StreamDomain::Auxiliary, 0);
    for trial in 0..100 {
        // four activity levels, each shared by a block of nodes
        let levels: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
        let a: Vec<f64> = (0..24).map(|i| levels[i / 6]).collect();
        let chi: Vec<f64> = (0..24).map(|_| rng.random_range(0.05..1.0)).collect();
        let pi: Vec<f64> = (0..24).map(|_| rng.random_range(0.05..1.0)).collect();
        let mut pi2 = pi.clone();
        for block in pi2.chunks_mut(6) {
            block.shuffle(&mut rng);
        }
        let pa = ModelParams::new(3, a.clone(), chi.clone(), pi, 0.6, 0.4).unwrap();
        let pb = ModelParams::new(3, a, chi, pi2, 0.6, 0.4).unwrap();
        let order = correlation_comparison(&pa, &pb).unwrap();
        let (ca, cb) = (WeightedMeans::of(&pa).chi_pi, WeightedMeans::of(&pb).chi_pi);
        if (ca - cb).abs() > 1e-12 {
            assert_eq!(order, ca.partial_cmp(&cb).unwrap(), "trial {trial}");
        }
    }
}

#[test]
fn unequal_means_are_rejected() {
    let a = ModelParams::homogeneous(3, 1, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap();
    let mut b = a.clone();
    b.chi[0] = 0.9;
    assert!(matches!(correlation_comparison(&a, &b), Err(BoundsError::Precondition(_))));
}

#[test]
fn bound_is_monotone_in_chi_and_pi() {
    for seed in 0..30 {
        let p = unit_params(15, 3, seed);
        let base = alpha_u(&p).unwrap();
        for i in 0..15 {
            let mut q = p.clone();
            q.chi[i] = (q.chi[i] * 1.1).min(1.0);
            assert!(alpha_u(&q).unwrap() >= base - 1e-15);
            let mut q = p.clone();
            q.pi[i] = (q.pi[i] * 1.1).min(1.0);
            assert!(alpha_u(&q).unwrap() >= base - 1e-15);
        }
    }
}

#[test]
fn case1_regression_value() {
    let p = random_params(250, 2, &ActivityDistribution::CASE_1, 0.8, 0.8, Seed(2024)).unwrap();
    let r = alpha_upper(&p).unwrap();
    // pinned from the first run
    assert!((r.alpha_u - 0.208_356_483_087_468_3).abs() < 1e-12, "{}", r.alpha_u);
}

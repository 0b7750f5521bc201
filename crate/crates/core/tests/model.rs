use adsis_core::model::{
    powerlaw_inverse_cdf, random_params, sample_powerlaw_activities, sample_uniform_activities, weighted_average,
    Weight,
};
use adsis_core::{ActivityDistribution, ModelParams, Seed, StreamDomain};
use proptest::prelude::*;

#[test]
fn powerlaw_mean_matches_integral() {
    let (e, lo, hi) = (-2.8f64, 1e-3f64, 1.0f64);
    let mut rng = Seed(31).stream(StreamDomain::Activities, 0);
    let a = sample_powerlaw_activities(1_000_000, e, lo, hi, &mut rng).unwrap();
    let empirical = a.iter().sum::<f64>() / a.len() as f64;
    // mean = int a^{1+e} / int a^e over [lo, hi]
    let num = (hi.powf(2.0 + e) - lo.powf(2.0 + e)) / (2.0 + e);
    let den = (hi.powf(1.0 + e) - lo.powf(1.0 + e)) / (1.0 + e);
    let analytic = num / den;
    assert!((empirical / analytic - 1.0).abs() < 0.01, "{empirical} vs {analytic}");
    assert!(a.iter().all(|&x| (lo..=hi).contains(&x)));
}

#[test]
fn case1_activities_lie_in_range() {
    let a = ActivityDistribution::CASE_1.sample(250, &mut Seed(1).stream(StreamDomain::Activities, 0)).unwrap();
    assert!(a.iter().all(|&x| x > 0.0 && x <= 0.01));
    let b = ActivityDistribution::CASE_1.sample(250, &mut Seed(1).stream(StreamDomain::Activities, 0)).unwrap();
    assert_eq!(a, b);
    let c = ActivityDistribution::CASE_2.sample(250, &mut Seed(1).stream(StreamDomain::Activities, 0)).unwrap();
    assert!(c.iter().all(|&x| (1e-3..=1.0).contains(&x)));
}

#[test]
fn random_params_are_valid_and_reproducible() {
    let a = random_params(40, 3, &ActivityDistribution::CASE_2, 0.5, 0.5, Seed(8)).unwrap();
    let b = random_params(40, 3, &ActivityDistribution::CASE_2, 0.5, 0.5, Seed(8)).unwrap();
    assert_eq!(a, b);
    a.validate().unwrap();
    let c = random_params(40, 3, &ActivityDistribution::CASE_2, 0.5, 0.5, Seed(9)).unwrap();
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn derived_ratio_matches_rate_ratio(
        rates in prop::collection::vec((0.01f64..=1.0, 0.01f64..=1.0, 0.01f64..=1.0), 2..30),
        m_frac in 0.0f64..1.0,
    ) {
        let n = rates.len();
        let m = 1 + ((n - 2) as f64 * m_frac) as usize;
        let p = ModelParams::new(
            m,
            rates.iter().map(|r| r.0).collect(),
            rates.iter().map(|r| r.1).collect(),
            rates.iter().map(|r| r.2).collect(),
            0.5,
            0.5,
        ).unwrap();
        let d = p.derived_rates();
        for i in 0..n {
            prop_assert!((d.phi[i] / d.psi[i] - p.chi[i] / p.pi[i]).abs() <= 1e-12 * (p.chi[i] / p.pi[i]));
            prop_assert!(d.phi[i] > 0.0 && d.phi[i] <= d.bar_m);
        }
    }

    #[test]
    fn weighted_average_is_linear(
        v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.01f64..1.0), 1..40),
    ) {
        let x: Vec<f64> = v.iter().map(|t| t.0).collect();
        let y: Vec<f64> = v.iter().map(|t| t.1).collect();
        let a: Vec<f64> = v.iter().map(|t| t.2).collect();
        let s: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        for w in [Weight::A, Weight::ASquared] {
            let lhs = weighted_average(&s, &a, w).unwrap();
            let rhs = weighted_average(&x, &a, w).unwrap() + weighted_average(&y, &a, w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn samplers_stay_in_range(seed in any::<u64>(), lo in 0.0f64..0.5, width in 0.01f64..0.5) {
        let hi = lo + width;
        let mut rng = Seed(seed).stream(StreamDomain::Auxiliary, 0);
        let u = sample_uniform_activities(50, lo, hi, &mut rng).unwrap();
        prop_assert!(u.iter().all(|&x| x > lo.max(0.0) - 1e-15 && x <= hi && x > 0.0));
        let plo = lo.max(1e-3);
        let p = sample_powerlaw_activities(50, -2.1, plo, 1.0, &mut rng).unwrap();
        prop_assert!(p.iter().all(|&x| x >= plo && x <= 1.0));
    }

    #[test]
    fn inverse_cdf_is_monotone(u1 in 0.0f64..=1.0, u2 in 0.0f64..=1.0) {
        let (a, b) = (powerlaw_inverse_cdf(u1, -2.8, 1e-3, 1.0), powerlaw_inverse_cdf(u2, -2.8, 1e-3, 1.0));
        prop_assert!(u1 > u2 || a <= b);
    }
}

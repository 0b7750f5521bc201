//! Model parameters, derived rates and activity-rate samplers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{Seed, StreamDomain};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("m must satisfy 1 <= m <= n - 1 = {max}, got {m}")]
    Degree { m: usize, max: usize },
    #[error("{field} has length {got}, expected {expected}")]
    LengthMismatch { field: &'static str, expected: usize, got: usize },
    #[error("{field}[{index}] = {value} is outside (0, 1]")]
    RateOutOfRange { field: &'static str, index: usize, value: f64 },
    #[error("{field} = {value} is out of range")]
    ScalarOutOfRange { field: &'static str, value: f64 },
    #[error("invalid sampling interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("power-law exponent must be below -1, got {0}")]
    InvalidExponent(f64),
}

/// All rates of the activity-driven A-SIS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    /// Neighbours chosen per activation.
    pub m: usize,
    /// Activity rates.
    pub a: Vec<f64>,
    /// Adaptation factors: an infected node activates with probability `chi_i a_i`.
    pub chi: Vec<f64>,
    /// Acceptance rates: an infected node accepts a proposed edge with probability `pi_i`.
    pub pi: Vec<f64>,
    pub beta: f64,
    pub delta: f64,
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

impl ModelParams {
    /// Builds and validates a parameter set; `n` is taken from `a`.
    pub fn new(
        m: usize,
        a: Vec<f64>,
        chi: Vec<f64>,
        pi: Vec<f64>,
        beta: f64,
        delta: f64,
    ) -> Result<Self, ModelError> {
        let p = Self { n: a.len(), m, a, chi, pi, beta, delta };
        p.validate()?;
        Ok(p)
    }

    /// Every node shares the same `a`, `chi` and `pi`.
    pub fn homogeneous(
        n: usize,
        m: usize,
        a: f64,
        chi: f64,
        pi: f64,
        beta: f64,
        delta: f64,
    ) -> Result<Self, ModelError> {
        Self::new(m, vec![a; n], vec![chi; n], vec![pi; n], beta, delta)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n;
        if n < 2 {
            return Err(ModelError::TooFewNodes(n));
        }
        if self.m < 1 || self.m > n - 1 {
            return Err(ModelError::Degree { m: self.m, max: n - 1 });
        }
        for (field, v) in [("a", &self.a), ("chi", &self.chi), ("pi", &self.pi)] {
            if v.len() != n {
                return Err(ModelError::LengthMismatch { field, expected: n, got: v.len() });
            }
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| !in_unit(x)) {
                return Err(ModelError::RateOutOfRange { field, index, value });
            }
        }
        // beta = 0 is accepted as the recovery-only limit
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(ModelError::ScalarOutOfRange { field: "beta", value: self.beta });
        }
        if !in_unit(self.delta) {
            return Err(ModelError::ScalarOutOfRange { field: "delta", value: self.delta });
        }
        Ok(())
    }

    /// `m / (n - 1)`.
    pub fn bar_m(&self) -> f64 {
        self.m as f64 / (self.n - 1) as f64
    }

    pub fn derived_rates(&self) -> DerivedRates {
        let bar_m = self.bar_m();
        let phi = self.a.iter().zip(&self.chi).map(|(a, c)| bar_m * c * a).collect();
        let psi = self.a.iter().zip(&self.pi).map(|(a, p)| bar_m * p * a).collect();
        DerivedRates { bar_m, phi, psi }
    }

    /// Same parameters with `chi = pi = 1`, i.e. plain SIS on the activity-driven network.
    pub fn without_adaptation(&self) -> Self {
        Self { chi: vec![1.0; self.n], pi: vec![1.0; self.n], ..self.clone() }
    }

    /// Applies the node relabelling `perm[new] = old` to every per-node field.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect();
        Self { a: pick(&self.a), chi: pick(&self.chi), pi: pick(&self.pi), ..self.clone() }
    }
}

/// `bar_m`, `phi_i = bar_m chi_i a_i` and `psi_i = bar_m pi_i a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRates {
    pub bar_m: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Weighting used by [`weighted_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `(1/n) sum a_i xi_i`
    A,
    /// `(1/n) sum a_i^2 xi_i`
    ASquared,
}

pub fn weighted_average(xi: &[f64], a: &[f64], weight: Weight) -> Result<f64, ModelError> {
    if xi.len() != a.len() {
        return Err(ModelError::LengthMismatch { field: "xi", expected: a.len(), got: xi.len() });
    }
    let sum: f64 = match weight {
        Weight::A => xi.iter().zip(a).map(|(x, a)| a * x).sum(),
        Weight::ASquared => xi.iter().zip(a).map(|(x, a)| a * a * x).sum(),
    };
    Ok(sum / a.len() as f64)
}

/// Plain mean.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `n` draws from `Uniform(lo, hi]`; exact zeros are redrawn.
pub fn sample_uniform_activities<R: Rng + ?Sized>(
    n: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ModelError> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(ModelError::InvalidInterval { lo, hi });
    }
    Ok((0..n)
        .map(|_| loop {
            let u: f64 = rng.random();
            let v = hi - u * (hi - lo);
            if v > 0.0 {
                break v;
            }
        })
        .collect())
}

/// `lo^{1+e} + u (hi^{1+e} - lo^{1+e})` raised to `1/(1+e)`.
pub fn powerlaw_inverse_cdf(u: f64, exponent: f64, lo: f64, hi: f64) -> f64 {
    let e1 = 1.0 + exponent;
    let (l, h) = (lo.powf(e1), hi.powf(e1));
    (l + u * (h - l)).powf(1.0 / e1).clamp(lo, hi)
}

/// `n` draws with density proportional to `a^exponent` on `[lo, hi]`.
pub fn sample_powerlaw_activities<R: Rng + ?Sized>(
    n: usize,
    exponent: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ModelError> {
    if !(exponent < -1.0) {
        return Err(ModelError::InvalidExponent(exponent));
    }
    if !(0.0 < lo && lo < hi && hi <= 1.0) {
        return Err(ModelError::InvalidInterval { lo, hi });
    }
    Ok((0..n)
        .map(|_| powerlaw_inverse_cdf(rng.random(), exponent, lo, hi))
        .collect())
}

/// Activity-rate distributions used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivityDistribution {
    Uniform { lo: f64, hi: f64 },
    PowerLaw { exponent: f64, lo: f64, hi: f64 },
}

impl ActivityDistribution {
    /// Uniform on `(0, 0.01]`.
    pub const CASE_1: Self = Self::Uniform { lo: 0.0, hi: 0.01 };
    /// Density proportional to `a^-2.8` on `[0.001, 1]`.
    pub const CASE_2: Self = Self::PowerLaw { exponent: -2.8, lo: 1e-3, hi: 1.0 };

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>, ModelError> {
        match *self {
            Self::Uniform { lo, hi } => sample_uniform_activities(n, lo, hi, rng),
            Self::PowerLaw { exponent, lo, hi } => sample_powerlaw_activities(n, exponent, lo, hi, rng),
        }
    }
}

/// Random parameter set: activities from `dist`, `chi` and `pi` uniform on
/// `(0, 1]`, each drawn from its own stream of `seed`.
pub fn random_params(
    n: usize,
    m: usize,
    dist: &ActivityDistribution,
    beta: f64,
    delta: f64,
    seed: Seed,
) -> Result<ModelParams, ModelError> {
    let a = dist.sample(n, &mut seed.stream(StreamDomain::Activities, 0))?;
    let chi = sample_uniform_activities(n, 0.0, 1.0, &mut seed.stream(StreamDomain::Adaptation, 0))?;
    let pi = sample_uniform_activities(n, 0.0, 1.0, &mut seed.stream(StreamDomain::Acceptance, 0))?;
    ModelParams::new(m, a, chi, pi, beta, delta)
}

//! Mean-field upper bound on the decay rate.
//!
//! Infection probabilities are dominated by `F^t p(0)` with
//! `F = (1 - delta) I + beta A`, `A = 11^T - (1 - psi)(1 - phi)^T`. Because
//! `A` has rank two its spectral radius is `n rho(B)` for the 2x2 matrix `B`
//! built from `<phi>`, `<psi>` and `<phi psi>`, which gives the closed form
//! `alpha_u = 1 - delta + kappa bar_m n beta`.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::linalg::power_iteration;
use crate::model::{mean, weighted_average, ModelParams, Weight};

/// Largest negative discriminant attributed to rounding.
pub const DISCRIMINANT_SLACK: f64 = 1e-14;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("discriminant {0} is negative beyond rounding")]
    NegativeDiscriminant(f64),
    #[error("bound is inconsistent: alpha_u = {alpha_u}, rho(F) = {rho_f}, via roots = {via_roots}")]
    Inconsistent { alpha_u: f64, rho_f: f64, via_roots: f64 },
    #[error("power iteration for rho(A) did not converge, last estimate {0}")]
    PowerIteration(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// `F = (1 - delta) I + beta A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldMatrix(pub DMatrix<f64>);

impl MeanFieldMatrix {
    pub fn build(params: &ModelParams) -> Self {
        let d = params.derived_rates();
        let n = params.n;
        let f = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { 1.0 - params.delta } else { 0.0 };
            diag + params.beta * (d.phi[j] + d.psi[i] * (1.0 - d.phi[j]))
        });
        Self(f)
    }

    /// `[p0, F p0, F^2 p0, ...]`, `horizon + 1` vectors, not clipped to `[0, 1]`.
    pub fn propagate(&self, p0: &[f64], horizon: usize) -> Result<Vec<Vec<f64>>, BoundsError> {
        let n = self.0.nrows();
        if p0.len() != n {
            return Err(BoundsError::LengthMismatch { expected: n, got: p0.len() });
        }
        let mut out = Vec::with_capacity(horizon + 1);
        let mut p = nalgebra::DVector::from_column_slice(p0);
        out.push(p0.to_vec());
        for _ in 0..horizon {
            p = &self.0 * &p;
            out.push(p.as_slice().to_vec());
        }
        Ok(out)
    }
}

pub fn build_mean_field_matrix(params: &ModelParams) -> MeanFieldMatrix {
    MeanFieldMatrix::build(params)
}

pub fn propagate_upper_bound(
    f: &MeanFieldMatrix,
    p0: &[f64],
    horizon: usize,
) -> Result<Vec<Vec<f64>>, BoundsError> {
    f.propagate(p0, horizon)
}

/// `<phi>`, `<psi>`, `<phi psi>` (plain means over nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMeans {
    pub phi: f64,
    pub psi: f64,
    pub phi_psi: f64,
}

impl RateMeans {
    pub fn of(params: &ModelParams) -> Self {
        let d = params.derived_rates();
        let prod: Vec<f64> = d.phi.iter().zip(&d.psi).map(|(a, b)| a * b).collect();
        Self { phi: mean(&d.phi), psi: mean(&d.psi), phi_psi: mean(&prod) }
    }
}

/// `B = [[1, 1 - <psi>], [-1 + <phi>, -1 + <phi> + <psi> - <phi psi>]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoByTwoB {
    pub b: [[f64; 2]; 2],
    pub means: RateMeans,
}

impl TwoByTwoB {
    pub fn from_means(means: RateMeans) -> Self {
        let RateMeans { phi, psi, phi_psi } = means;
        Self {
            b: [[1.0, 1.0 - psi], [-1.0 + phi, -1.0 + phi + psi - phi_psi]],
            means,
        }
    }

    pub fn from_params(params: &ModelParams) -> Self {
        Self::from_means(RateMeans::of(params))
    }

    pub fn trace(&self) -> f64 {
        let m = self.means;
        m.phi + m.psi - m.phi_psi
    }

    pub fn determinant(&self) -> f64 {
        let m = self.means;
        m.phi * m.psi - m.phi_psi
    }

    /// Both real roots of `lambda^2 - T lambda + det = 0`, larger first.
    pub fn roots(&self) -> Result<(f64, f64), BoundsError> {
        let t = self.trace();
        let m = self.means;
        let disc = clamp_discriminant(t * t + 4.0 * (m.phi_psi - m.phi * m.psi))?;
        let s = disc.sqrt();
        Ok(((t + s) / 2.0, (t - s) / 2.0))
    }

    pub fn spectral_radius(&self) -> Result<f64, BoundsError> {
        self.roots().map(|r| r.0)
    }

    pub fn matrix(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(self.b[0][0], self.b[0][1], self.b[1][0], self.b[1][1])
    }
}

fn clamp_discriminant(disc: f64) -> Result<f64, BoundsError> {
    if disc >= 0.0 {
        Ok(disc)
    } else if disc >= -DISCRIMINANT_SLACK {
        Ok(0.0)
    } else {
        Err(BoundsError::NegativeDiscriminant(disc))
    }
}

/// `<chi>_a`, `<pi>_a` and `<chi pi>_{a^2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMeans {
    pub chi: f64,
    pub pi: f64,
    pub chi_pi: f64,
}

impl WeightedMeans {
    pub fn of(params: &ModelParams) -> Self {
        let a = &params.a;
        let prod: Vec<f64> = params.chi.iter().zip(&params.pi).map(|(c, p)| c * p).collect();
        Self {
            chi: weighted_average(&params.chi, a, Weight::A).expect("validated lengths"),
            pi: weighted_average(&params.pi, a, Weight::A).expect("validated lengths"),
            chi_pi: weighted_average(&prod, a, Weight::ASquared).expect("validated lengths"),
        }
    }
}

/// `kappa = [S + sqrt(S^2 + 4(<chi pi>_{a^2} - <chi>_a <pi>_a))] / 2`
/// with `S = <chi>_a + <pi>_a - bar_m <chi pi>_{a^2}`.
pub fn kappa(params: &ModelParams) -> Result<f64, BoundsError> {
    let w = WeightedMeans::of(params);
    let s = w.chi + w.pi - params.bar_m() * w.chi_pi;
    let disc = clamp_discriminant(s * s + 4.0 * (w.chi_pi - w.chi * w.pi))?;
    Ok((s + disc.sqrt()) / 2.0)
}

/// `kappa` for plain SIS (`chi = pi = 1`), from `<a>` and `<a^2>` only.
pub fn kappa0(params: &ModelParams) -> Result<f64, BoundsError> {
    let a1 = mean(&params.a);
    let a2 = params.a.iter().map(|a| a * a).sum::<f64>() / params.n as f64;
    let bm = params.bar_m();
    let disc = clamp_discriminant(4.0 * a2 - 4.0 * bm * a1 * a2 + bm * bm * a2 * a2)?;
    Ok((2.0 * a1 - bm * a2 + disc.sqrt()) / 2.0)
}

/// `1 - delta + kappa bar_m n beta`.
pub fn alpha_u(params: &ModelParams) -> Result<f64, BoundsError> {
    Ok(alpha_u_from_kappa(params, kappa(params)?))
}

pub fn alpha_u_from_kappa(params: &ModelParams, kappa: f64) -> f64 {
    1.0 - params.delta + kappa * params.bar_m() * params.n as f64 * params.beta
}

/// `1 - delta + kappa0 bar_m n beta`.
pub fn sis_alpha_u(params: &ModelParams) -> Result<f64, BoundsError> {
    Ok(alpha_u_from_kappa(params, kappa0(params)?))
}

/// The large-`n` form `1 - delta + (<a> + sqrt(<a^2>)) m beta`.
pub fn sis_alpha_u_large_n(params: &ModelParams) -> f64 {
    let a1 = mean(&params.a);
    let a2 = params.a.iter().map(|a| a * a).sum::<f64>() / params.n as f64;
    1.0 - params.delta + (a1 + a2.sqrt()) * params.m as f64 * params.beta
}

/// `rho(A)` by matrix-free power iteration, with `A_ij = 1 - (1 - psi_i)(1 - phi_j)`
/// applied as `phi_j + psi_i (1 - phi_j)` to avoid cancellation for small rates.
pub fn rho_a_power(params: &ModelParams) -> Result<f64, BoundsError> {
    let d = params.derived_rates();
    let v: Vec<f64> = d.phi.iter().map(|p| 1.0 - p).collect();
    let r = power_iteration(
        params.n,
        |x, y| {
            let s: f64 = d.phi.iter().zip(x).map(|(a, b)| a * b).sum();
            let t: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            for (yi, psi) in y.iter_mut().zip(&d.psi) {
                *yi = s + psi * t;
            }
        },
        POWER_TOL,
        POWER_MAX_ITER,
    );
    if r.converged {
        Ok(r.value)
    } else {
        Err(BoundsError::PowerIteration(r.value))
    }
}

/// `(rho(A), n rho(B))`, each computed independently.
pub fn rho_a_reduction_check(params: &ModelParams) -> Result<(f64, f64), BoundsError> {
    let lhs = rho_a_power(params)?;
    let rhs = params.n as f64 * TwoByTwoB::from_params(params).spectral_radius()?;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub kappa: f64,
    pub alpha_u: f64,
    pub rho_f: f64,
    pub rho_a: f64,
    pub rho_b: f64,
}

/// Closed-form bound, cross-checked against `rho(F) = 1 - delta + beta rho(A)`
/// (power iteration) and against the roots of the characteristic equation.
pub fn alpha_upper(params: &ModelParams) -> Result<BoundReport, BoundsError> {
    let kappa = kappa(params)?;
    let alpha_u = alpha_u_from_kappa(params, kappa);
    let rho_a = rho_a_power(params)?;
    let rho_b = TwoByTwoB::from_params(params).spectral_radius()?;
    let rho_f = 1.0 - params.delta + params.beta * rho_a;
    let via_roots = 1.0 - params.delta + rho_b * params.n as f64 * params.beta;
    let close = |x: f64| (x - alpha_u).abs() <= CONSISTENCY_TOL * alpha_u.abs().max(1e-300);
    if !(close(rho_f) && close(via_roots)) {
        return Err(BoundsError::Inconsistent { alpha_u, rho_f, via_roots });
    }
    Ok(BoundReport { kappa, alpha_u, rho_f, rho_a, rho_b })
}

/// The three conditions equivalent to `alpha_u <= 1 - delta + lambda n beta`:
/// `(1 - lambda)<phi psi> <= (lambda - <phi>)(lambda - <psi>)`,
/// `<phi> < lambda` and `<psi> < lambda`.
pub fn check_lambda_inequalities(params: &ModelParams, lambda: f64) -> [bool; 3] {
    let m = RateMeans::of(params);
    [
        (1.0 - lambda) * m.phi_psi <= (lambda - m.phi) * (lambda - m.psi),
        m.phi < lambda,
        m.psi < lambda,
    ]
}

/// Residual of `(1 - lambda)<phi psi> - (lambda - <phi>)(lambda - <psi>)`.
pub fn characteristic_residual(means: RateMeans, lambda: f64) -> f64 {
    (1.0 - lambda) * means.phi_psi - (lambda - means.phi) * (lambda - means.psi)
}

/// Orders `alpha_u(a)` against `alpha_u(b)` for parameter sets that differ
/// only in how `chi` and `pi` are paired. Requires equal `n, m, a, beta,
/// delta` and equal `<chi>_a`, `<pi>_a`; checks that a smaller
/// `<chi pi>_{a^2}` gives a strictly smaller bound.
pub fn correlation_comparison(a: &ModelParams, b: &ModelParams) -> Result<Ordering, BoundsError> {
    const TOL: f64 = 1e-12;
    if a.n != b.n || a.m != b.m || a.a != b.a || a.beta != b.beta || a.delta != b.delta {
        return Err(BoundsError::Precondition("n, m, a, beta and delta must match".into()));
    }
    let (wa, wb) = (WeightedMeans::of(a), WeightedMeans::of(b));
    if (wa.chi - wb.chi).abs() > TOL || (wa.pi - wb.pi).abs() > TOL {
        return Err(BoundsError::Precondition(format!(
            "weighted means differ: <chi>_a {} vs {}, <pi>_a {} vs {}",
            wa.chi, wb.chi, wa.pi, wb.pi
        )));
    }
    let (ua, ub) = (alpha_u(a)?, alpha_u(b)?);
    let diff = wa.chi_pi - wb.chi_pi;
    if diff.abs() > TOL {
        let expected = if diff < 0.0 { Ordering::Less } else { Ordering::Greater };
        if ua.partial_cmp(&ub) != Some(expected) {
            return Err(BoundsError::Precondition(format!(
                "ordering violated: <chi pi> {} vs {}, alpha_u {ua} vs {ub}",
                wa.chi_pi, wb.chi_pi
            )));
        }
    }
    Ok(ua.partial_cmp(&ub).unwrap_or(Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_gives_rank_one_correction() {
        let p = ModelParams::homogeneous(4, 3, 1.0, 1.0, 1.0, 0.3, 0.4).unwrap();
        let f = build_mean_field_matrix(&p).0;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.6 + 0.3 } else { 0.3 };
                assert!((f[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn off_diagonal_entry() {
        // psi_0 = 0.1, phi_1 = 0.2 with bar_m = 1.
        let p = ModelParams::new(1, vec![0.5, 0.4], vec![0.5, 0.5], vec![0.2, 0.5], 0.7, 0.5).unwrap();
        let f = build_mean_field_matrix(&p).0;
        assert!((f[(0, 1)] - 0.28 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_closed_forms() {
        let p = ModelParams::homogeneous(11, 2, 0.5, 1.0, 1.0, 0.4, 0.3).unwrap();
        let k = kappa(&p).unwrap();
        assert!((k - 0.95).abs() < 1e-12);
        assert!((kappa0(&p).unwrap() - 0.95).abs() < 1e-12);
        let r = alpha_upper(&p).unwrap();
        assert!((r.alpha_u - (0.7 + 0.95 * 0.2 * 11.0 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn inequalities_strict_at_mean_bound() {
        let p = ModelParams::new(1, vec![0.5, 0.9], vec![0.3, 1.0], vec![1.0, 0.6], 0.5, 0.5).unwrap();
        let m = RateMeans::of(&p);
        let ok = check_lambda_inequalities(&p, m.phi.max(m.psi));
        assert!(!ok[1] || !ok[2]);
    }
}

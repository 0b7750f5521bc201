//! Spectral radii of nonnegative matrices.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Perron root of a nonnegative operator by power iteration from the all-ones
/// vector. The estimate is the `l1` growth ratio `|Mx|_1 / |x|_1`; iteration
/// stops once two successive estimates differ by less than `tol` relative.
pub fn power_iteration<F>(dim: usize, mut apply: F, tol: f64, max_iter: usize) -> PowerIteration
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut x = vec![1.0 / dim as f64; dim];
    let mut y = vec![0.0; dim];
    let mut prev = f64::NAN;
    for k in 1..=max_iter {
        apply(&x, &mut y);
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return PowerIteration { value: 0.0, iterations: k, converged: true };
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (norm - prev).abs() <= tol * norm {
            return PowerIteration { value: norm, iterations: k, converged: true };
        }
        prev = norm;
    }
    PowerIteration { value: prev, iterations: max_iter, converged: false }
}

/// Spectral radius of a nonnegative matrix from `|M^k|^{1/k}` with `k = 2^j`,
/// computed by repeated squaring with rescaling. Unlike plain power iteration
/// this converges for periodic and reducible matrices, since the norm of a
/// matrix power grows like `poly(k) rho^k` whatever the spectrum's structure.
/// Returns the estimate and the number of squarings used.
pub fn spectral_radius_by_squaring(m: &DMatrix<f64>, tol: f64, max_squarings: u32) -> (f64, u32, bool) {
    let norm = |p: &DMatrix<f64>| -> f64 {
        p.row_iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max)
    };
    let mut p = m.clone();
    // log of the factor removed from p so far; p_true = exp(log_scale) * p
    let mut log_scale = 0.0;
    let mut k = 1.0_f64;
    let mut prev = f64::NAN;
    for j in 0..=max_squarings {
        let s = norm(&p);
        if s == 0.0 {
            return (0.0, j, true);
        }
        p /= s;
        log_scale += s.ln();
        let est = (log_scale / k).exp();
        if (est - prev).abs() <= tol * est {
            return (est, j, true);
        }
        prev = est;
        if j < max_squarings {
            p = &p * &p;
            log_scale *= 2.0;
            k *= 2.0;
        }
    }
    (prev, max_squarings, false)
}

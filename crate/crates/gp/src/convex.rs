//! Log-space form of a geometric program.
//!
//! With `y = log x`, a monomial `c prod x_v^{a_v}` becomes `exp(a.y + log c)`
//! and a posynomial becomes `exp(lse(A y + b))`. Taking logs turns every
//! posynomial into a convex log-sum-exp function and every monomial equality
//! into an affine equality.

use nalgebra::{DMatrix, DVector};

use crate::posynomial::Monomial;
use crate::{GpError, GpProblem};

/// `coeffs . y + constant`, with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineForm {
    pub fn from_monomial(m: &Monomial) -> Self {
        Self {
            coeffs: m.exponents().iter().map(|&(v, e)| (v.0, e)).collect(),
            constant: m.coeff().ln(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * y[i])
    }
}

/// `log sum_k exp(terms[k](y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp {
    pub terms: Vec<AffineForm>,
}

/// Value, sparse gradient and the weights needed to build the Hessian.
#[derive(Debug, Clone)]
pub struct LseEval {
    pub value: f64,
    /// Softmax weights of the terms.
    pub weights: Vec<f64>,
    /// Dense gradient.
    pub gradient: Vec<f64>,
    /// Indices where `gradient` may be nonzero.
    pub support: Vec<usize>,
}

impl LogSumExp {
    pub fn value(&self, y: &[f64]) -> f64 {
        let z: Vec<f64> = self.terms.iter().map(|t| t.value(y)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.terms.len() == 1 {
            return zmax;
        }
        zmax + z.iter().map(|&zi| (zi - zmax).exp()).sum::<f64>().ln()
    }

    pub fn is_affine(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn support(&self, dim: usize) -> Vec<usize> {
        let mut seen = vec![false; dim];
        let mut out = Vec::new();
        for t in &self.terms {
            for &(i, _) in &t.coeffs {
                if !seen[i] {
                    seen[i] = true;
                    out.push(i);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn eval(&self, y: &[f64]) -> LseEval {
        let z: Vec<f64> = self.terms.iter().map(|t| t.value(y)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = z.iter().map(|&zi| (zi - zmax).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut gradient = vec![0.0; y.len()];
        for (t, &w) in self.terms.iter().zip(&weights) {
            for &(i, c) in &t.coeffs {
                gradient[i] += w * c;
            }
        }
        LseEval {
            value: zmax + total.ln(),
            weights,
            gradient,
            support: self.support(y.len()),
        }
    }

    /// Adds `scale * hess(lse)(y)` to `h`, given a prior [`LogSumExp::eval`].
    pub fn add_hessian(&self, ev: &LseEval, scale: f64, h: &mut DMatrix<f64>) {
        if self.is_affine() {
            return;
        }
        for (t, &w) in self.terms.iter().zip(&ev.weights) {
            let sw = scale * w;
            for &(i, ci) in &t.coeffs {
                for &(j, cj) in &t.coeffs {
                    h[(i, j)] += sw * ci * cj;
                }
            }
        }
        add_outer(h, &ev.gradient, &ev.support, -scale);
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let ev = self.eval(y);
        let mut h = DMatrix::zeros(y.len(), y.len());
        self.add_hessian(&ev, 1.0, &mut h);
        h
    }
}

/// `h += scale * g g^T`, touching only `support`.
pub(crate) fn add_outer(h: &mut DMatrix<f64>, g: &[f64], support: &[usize], scale: f64) {
    for &i in support {
        let gi = scale * g[i];
        if gi == 0.0 {
            continue;
        }
        for &j in support {
            h[(i, j)] += gi * g[j];
        }
    }
}

/// `minimize objective(y) s.t. inequalities[k](y) <= 0, equalities[j](y) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub dim: usize,
    pub objective: LogSumExp,
    pub inequalities: Vec<LogSumExp>,
    pub equalities: Vec<AffineForm>,
}

impl ConvexProgram {
    /// Equality constraints as `(C, d)` with `C y = d`.
    pub fn equality_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.equalities.len();
        let mut c = DMatrix::zeros(p, self.dim);
        let mut d = DVector::zeros(p);
        for (r, eq) in self.equalities.iter().enumerate() {
            for &(i, v) in &eq.coeffs {
                c[(r, i)] += v;
            }
            d[r] = -eq.constant;
        }
        (c, d)
    }
}

fn lse_of(terms: &[Monomial]) -> LogSumExp {
    LogSumExp {
        terms: terms.iter().map(AffineForm::from_monomial).collect(),
    }
}

/// Rewrites `problem` in the variables `y = log x`.
pub fn log_transform(problem: &GpProblem) -> Result<ConvexProgram, GpError> {
    problem.validate()?;
    let mut inequalities = Vec::with_capacity(problem.inequalities.len());
    for (k, c) in problem.inequalities.iter().enumerate() {
        if c.is_zero() {
            return Err(GpError::DegenerateConstraint(k));
        }
        inequalities.push(lse_of(c.terms()));
    }
    Ok(ConvexProgram {
        dim: problem.num_vars(),
        objective: lse_of(problem.objective.terms()),
        inequalities,
        equalities: problem.equalities.iter().map(AffineForm::from_monomial).collect(),
    })
}

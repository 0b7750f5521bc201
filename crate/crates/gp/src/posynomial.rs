//! Monomials and posynomials over positive variables.

use std::fmt;
use std::ops::{Add, Mul};

use crate::GpError;

/// Index of a variable inside a [`crate::GpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// `coeff * prod_v x_v^{e_v}` with `coeff >= 0`.
///
/// Exponents are kept sorted by variable with duplicates merged and zero
/// exponents removed, so two equal monomials compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    coeff: f64,
    exponents: Vec<(VarId, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: &[(VarId, f64)]) -> Result<Self, GpError> {
        if !(coeff >= 0.0) || !coeff.is_finite() {
            return Err(GpError::InvalidCoefficient(coeff));
        }
        if let Some(&(v, e)) = exponents.iter().find(|(_, e)| !e.is_finite()) {
            return Err(GpError::InvalidExponent { var: v, exponent: e });
        }
        let mut exps = exponents.to_vec();
        exps.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(exps.len());
        for (v, e) in exps {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += e,
                _ => merged.push((v, e)),
            }
        }
        merged.retain(|&(_, e)| e != 0.0);
        Ok(Self { coeff, exponents: merged })
    }

    pub fn constant(coeff: f64) -> Result<Self, GpError> {
        Self::new(coeff, &[])
    }

    /// `coeff * x^exponent`.
    pub fn power(coeff: f64, var: VarId, exponent: f64) -> Result<Self, GpError> {
        Self::new(coeff, &[(var, exponent)])
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponents(&self) -> &[(VarId, f64)] {
        &self.exponents
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, GpError> {
        Self::new(self.coeff * factor, &self.exponents)
    }

    pub fn evaluate(&self, values: &[f64]) -> Result<f64, GpError> {
        let mut out = self.coeff;
        for &(v, e) in &self.exponents {
            let x = *values.get(v.0).ok_or(GpError::UnknownVariable(v))?;
            if !(x > 0.0) {
                return Err(GpError::NonPositiveValue { var: v, value: x });
            }
            out *= x.powf(e);
        }
        Ok(out)
    }

    /// `log(coeff) + sum_v e_v * y_v` at `y = log x`.
    pub fn log_evaluate(&self, log_values: &[f64]) -> f64 {
        self.exponents
            .iter()
            .fold(self.coeff.ln(), |acc, &(v, e)| acc + e * log_values[v.0])
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.exponents.iter().map(|&(v, _)| v)
    }
}

impl Mul for &Monomial {
    type Output = Monomial;

    fn mul(self, rhs: &Monomial) -> Monomial {
        let mut exps = self.exponents.clone();
        exps.extend_from_slice(&rhs.exponents);
        Monomial::new(self.coeff * rhs.coeff, &exps).expect("product of valid monomials is valid")
    }
}

/// A sum of monomials. Zero-coefficient terms are dropped on insertion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = Monomial>>(terms: I) -> Self {
        let mut p = Self::new();
        for t in terms {
            p.push(t);
        }
        p
    }

    pub fn push(&mut self, term: Monomial) {
        if !term.is_zero() {
            self.terms.push(term);
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// True when every coefficient is zero, i.e. the posynomial is identically 0.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, GpError> {
        let terms = self
            .terms
            .iter()
            .map(|t| t.scaled(factor))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_terms(terms))
    }

    pub fn evaluate(&self, values: &[f64]) -> Result<f64, GpError> {
        self.terms.iter().try_fold(0.0, |acc, t| Ok(acc + t.evaluate(values)?))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().flat_map(|t| t.vars())
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Self::from_terms([m])
    }
}

impl Add for Posynomial {
    type Output = Posynomial;

    fn add(mut self, rhs: Posynomial) -> Posynomial {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Add<Monomial> for Posynomial {
    type Output = Posynomial;

    fn add(mut self, rhs: Monomial) -> Posynomial {
        self.push(rhs);
        self
    }
}

impl Mul<&Monomial> for &Posynomial {
    type Output = Posynomial;

    fn mul(self, rhs: &Monomial) -> Posynomial {
        Posynomial::from_terms(self.terms.iter().map(|t| t * rhs))
    }
}

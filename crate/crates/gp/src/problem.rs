//! Geometric programs in standard form and their line-oriented text dump.
//!
//! The text format has one header line per block and one monomial per line:
//!
//! ```text
//! variables x y
//! objective
//! 1 x:-1 y:-1
//! inequality
//! 1 x:1
//! equality
//! 2 x:1 y:-1
//! ```
//!
//! A monomial line is a coefficient followed by `name:exponent` pairs. Lines
//! starting with `#` and blank lines are ignored. Each `inequality` block is
//! one posynomial constraint `<= 1`; each `equality` block holds exactly one
//! monomial constraint `= 1`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::posynomial::{Monomial, Posynomial, VarId};
use crate::GpError;

/// `minimize objective s.t. inequalities[k] <= 1, equalities[j] = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpProblem {
    pub variables: Vec<String>,
    pub objective: Posynomial,
    pub inequalities: Vec<Posynomial>,
    pub equalities: Vec<Monomial>,
}

impl GpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(name.into());
        VarId(self.variables.len() - 1)
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name).map(VarId)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn set_objective(&mut self, objective: impl Into<Posynomial>) {
        self.objective = objective.into();
    }

    /// Adds `constraint <= 1`. An identically-zero posynomial is vacuous and
    /// is not stored.
    pub fn add_inequality(&mut self, constraint: impl Into<Posynomial>) {
        let p = constraint.into();
        if !p.is_zero() {
            self.inequalities.push(p);
        }
    }

    /// Adds `monomial = 1`; the coefficient must be positive.
    pub fn add_equality(&mut self, monomial: Monomial) -> Result<(), GpError> {
        if monomial.is_zero() {
            return Err(GpError::DegenerateEquality(self.equalities.len()));
        }
        self.equalities.push(monomial);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if self.objective.is_zero() {
            return Err(GpError::EmptyObjective);
        }
        let n = self.variables.len();
        let check = |v: VarId| if v.0 < n { Ok(()) } else { Err(GpError::UnknownVariable(v)) };
        self.objective.vars().try_for_each(check)?;
        for c in &self.inequalities {
            c.vars().try_for_each(check)?;
        }
        for (j, e) in self.equalities.iter().enumerate() {
            if e.is_zero() {
                return Err(GpError::DegenerateEquality(j));
            }
            e.vars().try_for_each(check)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("variables");
        for v in &self.variables {
            out.push(' ');
            out.push_str(v);
        }
        out.push('\n');
        let mut write_poly = |header: &str, terms: &[Monomial]| {
            out.push_str(header);
            out.push('\n');
            for t in terms {
                let _ = write!(out, "{:?}", t.coeff());
                for &(v, e) in t.exponents() {
                    let _ = write!(out, " {}:{:?}", self.variables[v.0], e);
                }
                out.push('\n');
            }
        };
        write_poly("objective", self.objective.terms());
        for c in &self.inequalities {
            write_poly("inequality", c.terms());
        }
        for e in &self.equalities {
            write_poly("equality", std::slice::from_ref(e));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GpError> {
        enum Block {
            None,
            Objective,
            Inequality(Posynomial),
            Equality(Vec<Monomial>),
        }
        let mut problem = GpProblem::new();
        let mut index: HashMap<String, VarId> = HashMap::new();
        let mut block = Block::None;
        let mut objective_seen = false;

        fn flush(problem: &mut GpProblem, block: Block, line: usize) -> Result<(), GpError> {
            match block {
                Block::Inequality(p) => problem.add_inequality(p),
                Block::Equality(mut ms) => {
                    if ms.len() != 1 {
                        return Err(GpError::Parse {
                            line,
                            message: format!("equality block needs one monomial, got {}", ms.len()),
                        });
                    }
                    problem.add_equality(ms.pop().expect("len checked"))?;
                }
                Block::None | Block::Objective => {}
            }
            Ok(())
        }

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("nonempty line");
            match head {
                "variables" => {
                    for name in fields {
                        let id = problem.add_variable(name);
                        if index.insert(name.to_string(), id).is_some() {
                            return Err(GpError::Parse {
                                line: lineno,
                                message: format!("duplicate variable `{name}`"),
                            });
                        }
                    }
                }
                "objective" | "inequality" | "equality" => {
                    let prev = std::mem::replace(&mut block, Block::None);
                    flush(&mut problem, prev, lineno)?;
                    block = match head {
                        "objective" => {
                            if objective_seen {
                                return Err(GpError::Parse {
                                    line: lineno,
                                    message: "second objective block".into(),
                                });
                            }
                            objective_seen = true;
                            Block::Objective
                        }
                        "inequality" => Block::Inequality(Posynomial::new()),
                        _ => Block::Equality(Vec::new()),
                    };
                }
                coeff => {
                    let coeff: f64 = coeff.parse().map_err(|_| GpError::Parse {
                        line: lineno,
                        message: format!("bad coefficient `{coeff}`"),
                    })?;
                    let mut exps = Vec::new();
                    for pair in fields {
                        let (name, e) = pair.split_once(':').ok_or_else(|| GpError::Parse {
                            line: lineno,
                            message: format!("expected name:exponent, got `{pair}`"),
                        })?;
                        let v = *index.get(name).ok_or_else(|| GpError::Parse {
                            line: lineno,
                            message: format!("undeclared variable `{name}`"),
                        })?;
                        let e: f64 = e.parse().map_err(|_| GpError::Parse {
                            line: lineno,
                            message: format!("bad exponent `{e}`"),
                        })?;
                        exps.push((v, e));
                    }
                    let m = Monomial::new(coeff, &exps)?;
                    match &mut block {
                        Block::Objective => problem.objective.push(m),
                        Block::Inequality(p) => p.push(m),
                        Block::Equality(ms) => ms.push(m),
                        Block::None => {
                            return Err(GpError::Parse {
                                line: lineno,
                                message: "monomial outside of a block".into(),
                            })
                        }
                    }
                }
            }
        }
        flush(&mut problem, block, text.lines().count())?;
        problem.validate()?;
        Ok(problem)
    }
}

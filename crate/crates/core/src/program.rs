//! Integer program representation shared by the formulation builders and
//! the solver: typed variables with role tags, linear constraints, and a
//! plain-text dump for debugging.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("constraint {name:?} references variable index {index} out of range")]
    BadIndex { name: String, index: usize },
    #[error("variable {0:?} has inconsistent bounds")]
    BadBounds(String),
    #[error("constraint {0:?} has a non-finite coefficient or right-hand side")]
    NonFinite(String),
    #[error("role {0} is carried by more than one variable")]
    DuplicateRole(String),
    #[error("program has no variables")]
    Empty,
}

/// Variable domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

/// What a variable means in the formulation. Tags are unique per (role,
/// index) pair and drive decoding and the text dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// lambda_j; index 0 is the intercept.
    Coefficient(usize),
    /// Loss indicator psi_i for example i.
    Loss(usize),
    /// Penalty carrier Phi_j.
    Penalty(usize),
    /// Selection indicator alpha (by coefficient index).
    Selection(usize),
    /// Magnitude carrier beta (by coefficient index).
    Magnitude(usize),
    /// Selector u for one admissible value of one coefficient.
    ValueSelector { coeff: usize, ordinal: usize },
    /// Feature-use indicator nu (threshold-rule models), by parent feature.
    FeatureUse(usize),
    /// Extra-threshold count tau, by parent feature.
    ExtraThresholds(usize),
    /// Sign-agreement indicator delta, by parent feature.
    SignAgreement(usize),
    /// Predicted-positive indicator pi_i for example i.
    PredictedPositive(usize),
    /// Epigraph variable for a decomposed loss.
    EpigraphLoss,
    Aux,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub role: VarRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization MILP.
#[derive(Debug, Clone, Default)]
pub struct IntegerProgram {
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    /// Sparse objective terms; minimized.
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
}

impl IntegerProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        role: VarRole,
    ) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            role,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, role: VarRole) -> usize {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, role)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(LinearConstraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective_term(&mut self, var: usize, coef: f64) {
        if let Some(t) = self.objective.iter_mut().find(|(v, _)| *v == var) {
            t.1 += coef;
        } else {
            self.objective.push((var, coef));
        }
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    /// Indices of variables that must take integer values.
    pub fn integer_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind != VarKind::Continuous)
            .map(|(i, _)| i)
            .collect()
    }

    /// Variable index carrying a given role, if any.
    pub fn find_role(&self, role: VarRole) -> Option<usize> {
        self.vars.iter().position(|v| v.role == role)
    }

    /// Objective value of a full assignment.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut acc = self.objective_constant;
        for &(v, c) in &self.objective {
            acc += c * x[v];
        }
        acc
    }

    /// Largest constraint violation of an assignment (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (i, v) in self.vars.iter().enumerate() {
            worst = worst.max(v.lower - x[i]).max(x[i] - v.upper);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.vars.is_empty() {
            return Err(ProgramError::Empty);
        }
        for v in &self.vars {
            let bad = v.lower > v.upper
                || v.lower.is_nan()
                || v.upper.is_nan()
                || (v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0));
            if bad {
                return Err(ProgramError::BadBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() || c.terms.iter().any(|(_, a)| !a.is_finite()) {
                return Err(ProgramError::NonFinite(c.name.clone()));
            }
            for &(idx, _) in &c.terms {
                if idx >= self.vars.len() {
                    return Err(ProgramError::BadIndex {
                        name: c.name.clone(),
                        index: idx,
                    });
                }
            }
        }
        for &(idx, c) in &self.objective {
            if idx >= self.vars.len() || !c.is_finite() {
                return Err(ProgramError::BadIndex {
                    name: "objective".into(),
                    index: idx,
                });
            }
        }
        // Each tagged role belongs to exactly one variable.
        let mut roles: Vec<VarRole> = self
            .vars
            .iter()
            .map(|v| v.role)
            .filter(|r| !matches!(r, VarRole::Aux))
            .collect();
        roles.sort_by_key(|r| format!("{r:?}"));
        for w in roles.windows(2) {
            if w[0] == w[1] {
                return Err(ProgramError::DuplicateRole(format!("{:?}", w[0])));
            }
        }
        Ok(())
    }

    /// Human-readable LP-style dump: one constraint per line, names from
    /// the variable role tags.
    pub fn write_lp(&self) -> String {
        let mut out = String::new();
        out.push_str("minimize\n  obj:");
        for &(v, c) in &self.objective {
            let _ = write!(out, " {:+} {}", c, self.vars[v].name);
        }
        if self.objective_constant != 0.0 {
            let _ = write!(out, " {:+}", self.objective_constant);
        }
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let _ = write!(out, "  {}:", c.name);
            for &(v, a) in &c.terms {
                let _ = write!(out, " {:+} {}", a, self.vars[v].name);
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {} {}", op, c.rhs);
        }
        out.push_str("bounds\n");
        for v in &self.vars {
            let _ = writeln!(out, "  {} <= {} <= {}", v.lower, v.name, v.upper);
        }
        out.push_str("integers\n ");
        for v in &self.vars {
            if v.kind != VarKind::Continuous {
                let _ = write!(out, " {}", v.name);
            }
        }
        out.push('\n');
        out
    }
}

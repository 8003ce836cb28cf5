//! Solver-agnostic binary programs.

mod lp;
mod search;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::instance::Period;

pub use lp::{parse_solution, parse_status, read_lp, render_solution, write_lp, SolutionStatus};
pub use search::{bruteforce_solve, bruteforce_solve_from, SearchLimits, SearchOutcome, SearchStatus};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate variable name {0}")]
    DuplicateName(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable index {0} out of range")]
    BadIndex(usize),
    #[error("value {value} for {name} is not binary")]
    NonIntegral { name: String, value: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("objective index {0} out of range")]
    BadObjective(usize),
}

/// What a variable stands for; indices refer to instance patients and
/// ward rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VarTag {
    AssignPRT { p: usize, r: usize, t: Period },
    AssignPR { p: usize, r: usize },
    FemaleRoom { r: usize, t: Period },
    MaleRoom { r: usize, t: Period },
    SingleRoom { p: usize, r: usize, t: Period },
    Transfer { p: usize, r: usize, t: Period },
    /// Variables read back from a foreign LP file.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarRef {
    pub index: usize,
    pub name: String,
    pub tag: VarTag,
}

/// Replaces every character outside `[A-Za-z0-9_]` by `_`.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `sum coef * var + constant`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinearExpr {
    pub terms: Vec<(i64, usize)>,
    pub constant: i64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, coef: i64, var: usize) -> &mut Self {
        self.terms.push((coef, var));
        self
    }

    pub fn evaluate(&self, values: &VarAssignment) -> i64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(a, v)| if values.get(v) { a } else { 0 })
                .sum::<i64>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearConstraint {
    pub terms: Vec<(i64, usize)>,
    pub relation: Relation,
    pub rhs: i64,
    pub label: String,
}

impl LinearConstraint {
    pub fn lhs(&self, values: &VarAssignment) -> i64 {
        self.terms
            .iter()
            .map(|&(a, v)| if values.get(v) { a } else { 0 })
            .sum()
    }

    pub fn satisfied(&self, values: &VarAssignment) -> bool {
        self.relation.holds(self.lhs(values), self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Objective {
    pub sense: Sense,
    pub expr: LinearExpr,
    pub label: String,
}

/// Binary program with an ordered objective stack; position 0 has the
/// highest priority.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BipModel {
    pub name: String,
    pub vars: Vec<VarRef>,
    pub constraints: Vec<LinearConstraint>,
    pub objectives: Vec<Objective>,
    #[serde(skip)]
    by_name: HashMap<String, usize>,
}

impl BipModel {
    pub fn new(name: impl Into<String>) -> Self {
        BipModel {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, tag: VarTag) -> Result<usize, ModelError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let index = self.vars.len();
        self.by_name.insert(name.clone(), index);
        self.vars.push(VarRef { index, name, tag });
        Ok(index)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(i64, usize)>,
        relation: Relation,
        rhs: i64,
        label: impl Into<String>,
    ) -> Result<(), ModelError> {
        if let Some(&(_, v)) = terms.iter().find(|&&(_, v)| v >= self.vars.len()) {
            return Err(ModelError::BadIndex(v));
        }
        self.constraints.push(LinearConstraint {
            terms,
            relation,
            rhs,
            label: label.into(),
        });
        Ok(())
    }

    pub fn add_objective(&mut self, sense: Sense, expr: LinearExpr, label: impl Into<String>) -> Result<(), ModelError> {
        if let Some(&(_, v)) = expr.terms.iter().find(|&&(_, v)| v >= self.vars.len()) {
            return Err(ModelError::BadIndex(v));
        }
        self.objectives.push(Objective {
            sense,
            expr,
            label: label.into(),
        });
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn count_tagged(&self, pred: impl Fn(&VarTag) -> bool) -> usize {
        self.vars.iter().filter(|v| pred(&v.tag)).count()
    }

    /// Largest absolute coefficient over all constraints.
    pub fn max_abs_coefficient(&self) -> i64 {
        self.constraints
            .iter()
            .flat_map(|c| c.terms.iter().map(|&(a, _)| a.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn objective_values(&self, values: &VarAssignment) -> Vec<i64> {
        self.objectives.iter().map(|o| o.expr.evaluate(values)).collect()
    }

    pub fn violated_constraints(&self, values: &VarAssignment) -> Vec<&LinearConstraint> {
        self.constraints.iter().filter(|c| !c.satisfied(values)).collect()
    }
}

/// 0/1 value per model variable, in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct VarAssignment {
    values: Vec<bool>,
}

impl VarAssignment {
    pub fn zeros(n: usize) -> Self {
        VarAssignment { values: vec![false; n] }
    }

    pub fn from_bools(values: Vec<bool>) -> Self {
        VarAssignment { values }
    }

    pub fn get(&self, index: usize) -> bool {
        self.values[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.values[index] = value;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i)
    }
}

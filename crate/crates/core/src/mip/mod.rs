//! Solver-neutral mixed-integer feasibility problems.

mod lp;

pub use lp::export_lp;

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Index of a variable in a [`MipProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// What a variable stands for in the encoded network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    Input,
    PreActivation,
    PostActivation,
    Indicator,
    Auxiliary,
    OutputSelector,
}

/// Network position of a variable. Layer 0 is the network input; layer
/// `i + 1` holds the output (and indicators) of block `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Position {
    pub layer: usize,
    pub unit: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable index, no duplicates, no zero coefficients.
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Signed violation (positive when violated).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::Le => act - self.rhs,
            Relation::Ge => self.rhs - act,
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A feasibility problem: find values for all variables satisfying every
/// constraint, with binary variables integral.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MipProblem {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    positions: Vec<Option<Position>>,
    #[serde(skip)]
    var_names: HashSet<String>,
    #[serde(skip)]
    row_names: HashSet<String>,
}

pub(crate) fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl MipProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        position: Option<Position>,
    ) -> Result<VarId> {
        let name = name.into();
        if !valid_identifier(&name) {
            return Err(Error::InvalidName(name));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidBounds { lower, upper });
        }
        if !self.var_names.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.positions.push(position);
        Ok(VarId(self.variables.len() - 1))
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, position: Option<Position>) -> Result<VarId> {
        self.add_variable(name, VarKind::Continuous, lower, upper, position)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, position: Option<Position>) -> Result<VarId> {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0, position)
    }

    /// Append `Σ terms (relation) rhs`. Terms are sorted by variable index,
    /// duplicates merged and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        let name = name.into();
        if !valid_identifier(&name) {
            return Err(Error::InvalidName(name));
        }
        if !rhs.is_finite() {
            return Err(Error::Encoding(format!("constraint `{name}` has non-finite rhs {rhs}")));
        }
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        for (v, a) in &terms {
            if v.0 >= self.variables.len() {
                return Err(Error::Encoding(format!("constraint `{name}` references undeclared variable {}", v.0)));
            }
            if !a.is_finite() {
                return Err(Error::Encoding(format!("constraint `{name}` has non-finite coefficient")));
            }
        }
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some((w, b)) if *w == v => *b += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        if merged.is_empty() {
            return Err(Error::Encoding(format!("constraint `{name}` has no terms")));
        }
        if !self.row_names.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
        self.constraints.push(Constraint {
            name,
            terms: merged,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn position(&self, v: VarId) -> Option<Position> {
        self.positions[v.0]
    }

    /// Variable ↔ network position index.
    pub fn index_map(&self) -> impl Iterator<Item = (VarId, Position)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (VarId(i), p)))
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Variables with the given role, ordered by unit.
    pub fn vars_with_role(&self, role: Role) -> Vec<VarId> {
        let mut vars: Vec<(usize, usize, VarId)> = self
            .index_map()
            .filter(|(_, p)| p.role == role)
            .map(|(v, p)| (p.layer, p.unit, v))
            .collect();
        vars.sort();
        vars.into_iter().map(|(_, _, v)| v).collect()
    }
}

/// One value per variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub values: Vec<f64>,
}

impl Assignment {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn get(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Bound { var: VarId, value: f64 },
    Integrality { var: VarId, value: f64 },
    Constraint { index: usize, amount: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Independent feasibility check: every bound and constraint within `tol`,
/// every binary within `tol` of 0 or 1.
pub fn check_assignment(p: &MipProblem, a: &Assignment, tol: f64) -> Result<FeasibilityReport> {
    if a.values.len() != p.variables.len() {
        return Err(Error::MissingValue {
            expected: p.variables.len(),
            found: a.values.len(),
        });
    }
    let mut violations = Vec::new();
    for (i, (var, &x)) in p.variables.iter().zip(&a.values).enumerate() {
        let var_id = VarId(i);
        if !x.is_finite() || x < var.lower - tol || x > var.upper + tol {
            violations.push(Violation::Bound { var: var_id, value: x });
        }
        if var.kind == VarKind::Binary && x.is_finite() && (x - x.round()).abs() > tol {
            violations.push(Violation::Integrality { var: var_id, value: x });
        }
    }
    for (index, c) in p.constraints.iter().enumerate() {
        let amount = c.violation(&a.values);
        if !(amount <= tol) {
            violations.push(Violation::Constraint { index, amount });
        }
    }
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    })
}

//! Completing an assignment once every binary variable is fixed.

use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::mip::{Assignment, MipProblem, Relation, VarKind};

use super::propagate::{Domains, Row};
use super::Cut;

pub(crate) enum LeafLp {
    Feasible(Vec<f64>),
    Infeasible,
    Interrupted,
}

/// Each variable at its midpoint (or its finite bound, or 0).
pub(crate) fn midpoint(dom: &Domains) -> Vec<f64> {
    dom.lower
        .iter()
        .zip(&dom.upper)
        .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
            _ if l == u => l,
            (true, true) => 0.5 * (l + u),
            (true, false) => l,
            (false, true) => u,
            (false, false) => 0.0,
        })
        .collect()
}

pub(crate) fn satisfies(rows: &[&Row], values: &[f64], tol: f64) -> bool {
    rows.iter().all(|r| r.violation(values) <= tol)
}

/// Solve the linear feasibility problem left after fixing every variable
/// whose domain is a point. Values of fixed variables are kept.
pub(crate) fn complete(rows: &[&Row], dom: &Domains, tol: f64, deadline: Option<Instant>) -> LeafLp {
    let n = dom.lower.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    if let Some(d) = deadline {
        let left = d.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return LeafLp::Interrupted;
        }
        lp.set_time_limit(left);
    }
    let mut lp_var = vec![None; n];
    for v in 0..n {
        if !dom.is_fixed(v) {
            lp_var[v] = Some(lp.add_var(0.0, (dom.lower[v], dom.upper[v])));
        }
    }
    for r in rows {
        let mut constant = 0.0;
        let mut expr = Vec::new();
        for &(v, a) in &r.terms {
            match lp_var[v] {
                Some(x) => expr.push((x, a)),
                None => constant += a * dom.lower[v],
            }
        }
        if expr.is_empty() {
            if constant < r.lo - tol || constant > r.hi + tol {
                return LeafLp::Infeasible;
            }
            continue;
        }
        if r.lo == r.hi {
            lp.add_constraint(expr, ComparisonOp::Eq, r.lo - constant);
            continue;
        }
        if r.lo.is_finite() {
            lp.add_constraint(expr.clone(), ComparisonOp::Ge, r.lo - constant);
        }
        if r.hi.is_finite() {
            lp.add_constraint(expr, ComparisonOp::Le, r.hi - constant);
        }
    }
    match lp.solve() {
        Ok(outcome) => match outcome.solution() {
            Some(sol) => {
                let mut values = midpoint(dom);
                for v in 0..n {
                    if let Some(x) = lp_var[v] {
                        values[v] = sol.var_value_raw(x).clamp(dom.lower[v], dom.upper[v]);
                    }
                }
                LeafLp::Feasible(values)
            }
            None => LeafLp::Interrupted,
        },
        Err(microlp::Error::Infeasible) => LeafLp::Infeasible,
        Err(e) => {
            tracing::warn!(error = ?e, "leaf LP failed; treating leaf as infeasible");
            LeafLp::Infeasible
        }
    }
}

/// Find values for the continuous variables of `problem` (plus `extra`
/// rows) with every binary fixed to its value in `binaries`. Returns `None`
/// if that linear program is infeasible.
pub fn solve_fixed(problem: &MipProblem, extra: &[Cut], binaries: &Assignment, tol: f64) -> Option<Assignment> {
    let mut dom = Domains::of(problem);
    for (v, var) in problem.variables().iter().enumerate() {
        if var.kind == VarKind::Binary {
            let b = binaries.values[v].round();
            dom.lower[v] = b;
            dom.upper[v] = b;
        }
    }
    let rows: Vec<Row> = problem
        .constraints()
        .iter()
        .map(|c| Row::from_relation(c.terms.iter().map(|(v, a)| (v.0, *a)).collect(), c.relation, c.rhs))
        .chain(extra.iter().map(Cut::to_row))
        .collect();
    let refs: Vec<&Row> = rows.iter().collect();
    match complete(&refs, &dom, tol, None) {
        LeafLp::Feasible(values) if satisfies(&refs, &values, tol) => Some(Assignment::new(values)),
        _ => None,
    }
}

impl Cut {
    pub(crate) fn to_row(&self) -> Row {
        Row::from_relation(self.terms.iter().map(|(v, a)| (v.0, *a)).collect(), self.relation, self.rhs)
    }

    /// `Σ_{b = 1} (1 − b) + Σ_{b = 0} b ≥ 1` over every binary of `problem`.
    pub fn no_good(problem: &MipProblem, a: &Assignment) -> Cut {
        let mut terms = Vec::new();
        let mut ones = 0.0;
        for (v, var) in problem.variables().iter().enumerate() {
            if var.kind != VarKind::Binary {
                continue;
            }
            if a.values[v].round() == 1.0 {
                terms.push((crate::mip::VarId(v), -1.0));
                ones += 1.0;
            } else {
                terms.push((crate::mip::VarId(v), 1.0));
            }
        }
        Cut {
            terms,
            relation: Relation::Ge,
            rhs: 1.0 - ones,
        }
    }
}

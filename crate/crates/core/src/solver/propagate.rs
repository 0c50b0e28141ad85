//! Interval constraint propagation with a trail for backtracking.

use std::collections::VecDeque;

use crate::mip::{MipProblem, Relation, VarKind};

/// Continuous bounds must shrink by more than this fraction of their width
/// (or `MIN_STEP`) to count as a change; prevents endless creeping.
const REL_STEP: f64 = 1e-4;
const MIN_STEP: f64 = 1e-9;

/// `lo ≤ Σ a_k x_k ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

impl Row {
    pub fn from_relation(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        let (lo, hi) = match relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
            Relation::Eq => (rhs, rhs),
        };
        Self { terms, lo, hi }
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let act: f64 = self.terms.iter().map(|(v, a)| a * values[*v]).sum();
        (self.lo - act).max(act - self.hi).max(0.0)
    }
}

/// Current domain of every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Domains {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domains {
    pub fn of(problem: &MipProblem) -> Self {
        Self {
            lower: problem.variables().iter().map(|v| v.lower).collect(),
            upper: problem.variables().iter().map(|v| v.upper).collect(),
        }
    }

    pub fn is_fixed(&self, v: usize) -> bool {
        self.lower[v] == self.upper[v]
    }
}

/// Result of running propagation to a fixpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    Fixpoint,
    /// The constraint whose activity interval excludes its right-hand side.
    Conflict { row: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Engine {
    pub rows: Vec<Row>,
    pub var_rows: Vec<Vec<u32>>,
    pub binary: Vec<bool>,
    pub dom: Domains,
    trail: Vec<(u32, f64, f64)>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    tol: f64,
    pub row_visits: u64,
}

impl Engine {
    pub fn new(problem: &MipProblem, tol: f64) -> Self {
        let n = problem.variables().len();
        let mut e = Self {
            rows: Vec::new(),
            var_rows: vec![Vec::new(); n],
            binary: problem.variables().iter().map(|v| v.kind == VarKind::Binary).collect(),
            dom: Domains::of(problem),
            trail: Vec::new(),
            queue: VecDeque::new(),
            queued: Vec::new(),
            tol,
            row_visits: 0,
        };
        for c in problem.constraints() {
            e.add_row(Row::from_relation(
                c.terms.iter().map(|(v, a)| (v.0, *a)).collect(),
                c.relation,
                c.rhs,
            ));
        }
        e
    }

    pub fn with_domains(problem: &MipProblem, dom: Domains, tol: f64) -> Self {
        let mut e = Self::new(problem, tol);
        e.dom = dom;
        e
    }

    /// Append a row and schedule it for propagation.
    pub fn add_row(&mut self, row: Row) -> usize {
        let r = self.rows.len();
        for (v, _) in &row.terms {
            self.var_rows[*v].push(r as u32);
        }
        self.rows.push(row);
        self.queued.push(false);
        self.enqueue(r);
        r
    }

    pub fn enqueue(&mut self, r: usize) {
        if !self.queued[r] {
            self.queued[r] = true;
            self.queue.push_back(r as u32);
        }
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, lo, hi) = self.trail.pop().expect("non-empty");
            self.dom.lower[v as usize] = lo;
            self.dom.upper[v as usize] = hi;
        }
        self.clear_queue();
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r as usize] = false;
        }
    }

    fn set(&mut self, v: usize, lo: f64, hi: f64) {
        self.trail.push((v as u32, self.dom.lower[v], self.dom.upper[v]));
        self.dom.lower[v] = lo;
        self.dom.upper[v] = hi;
        for k in 0..self.var_rows[v].len() {
            let r = self.var_rows[v][k] as usize;
            self.enqueue(r);
        }
    }

    /// Fix a variable (used for branching). Returns false if `value` lies
    /// outside the current domain.
    pub fn fix(&mut self, v: usize, value: f64) -> bool {
        if value < self.dom.lower[v] || value > self.dom.upper[v] {
            return false;
        }
        if self.dom.lower[v] != value || self.dom.upper[v] != value {
            self.set(v, value, value);
        }
        true
    }

    /// Tighten `v` to `[lo, hi] ∩ dom(v)`. Returns false on an empty domain.
    fn tighten(&mut self, v: usize, mut lo: f64, mut hi: f64) -> bool {
        let (cur_lo, cur_hi) = (self.dom.lower[v], self.dom.upper[v]);
        if self.binary[v] {
            lo = (lo - 1e-9).ceil().max(cur_lo);
            hi = (hi + 1e-9).floor().min(cur_hi);
            if lo > hi {
                return false;
            }
            if lo != cur_lo || hi != cur_hi {
                self.set(v, lo, hi);
            }
            return true;
        }
        let width = cur_hi - cur_lo;
        let step = if width.is_finite() { (REL_STEP * width).max(MIN_STEP) } else { MIN_STEP };
        let new_lo = if lo > cur_lo + step { lo } else { cur_lo };
        let new_hi = if hi < cur_hi - step { hi } else { cur_hi };
        if new_lo > new_hi {
            if new_lo - new_hi > self.tol {
                return false;
            }
            // crossing within tolerance: collapse onto the bound that moved
            let p = if new_lo != cur_lo { new_hi } else { new_lo };
            let p = p.clamp(cur_lo, cur_hi);
            self.set(v, p, p);
            return true;
        }
        if new_lo != cur_lo || new_hi != cur_hi {
            self.set(v, new_lo, new_hi);
        }
        true
    }

    /// Drop variables fixed in the current state from every row and forget
    /// the trail, making the current state the new root.
    pub fn fold_fixed(&mut self) {
        for row in &mut self.rows {
            let mut shift = 0.0;
            row.terms.retain(|&(v, a)| {
                if self.dom.lower[v] == self.dom.upper[v] {
                    shift += a * self.dom.lower[v];
                    false
                } else {
                    true
                }
            });
            row.lo -= shift;
            row.hi -= shift;
        }
        for list in &mut self.var_rows {
            list.clear();
        }
        for (r, row) in self.rows.iter().enumerate() {
            for (v, _) in &row.terms {
                self.var_rows[*v].push(r as u32);
            }
        }
        self.trail.clear();
        self.clear_queue();
    }

    /// Propagate queued rows to a fixpoint.
    pub fn propagate(&mut self) -> Propagation {
        while let Some(r) = self.queue.pop_front() {
            let r = r as usize;
            self.queued[r] = false;
            self.row_visits += 1;
            if !self.propagate_row(r) {
                self.clear_queue();
                return Propagation::Conflict { row: r };
            }
        }
        Propagation::Fixpoint
    }

    fn propagate_row(&mut self, r: usize) -> bool {
        let (lo_rhs, hi_rhs) = (self.rows[r].lo, self.rows[r].hi);
        let mut min_fin = 0.0;
        let mut max_fin = 0.0;
        let mut min_inf = 0usize;
        let mut max_inf = 0usize;
        for &(v, a) in &self.rows[r].terms {
            let (l, u) = (self.dom.lower[v], self.dom.upper[v]);
            let (cmin, cmax) = if a > 0.0 { (a * l, a * u) } else { (a * u, a * l) };
            if cmin.is_finite() {
                min_fin += cmin;
            } else {
                min_inf += 1;
            }
            if cmax.is_finite() {
                max_fin += cmax;
            } else {
                max_inf += 1;
            }
        }
        if min_inf == 0 && min_fin > hi_rhs + self.tol {
            return false;
        }
        if max_inf == 0 && max_fin < lo_rhs - self.tol {
            return false;
        }
        let need_hi = hi_rhs.is_finite() && min_inf <= 1;
        let need_lo = lo_rhs.is_finite() && max_inf <= 1;
        if !need_hi && !need_lo {
            return true;
        }
        for k in 0..self.rows[r].terms.len() {
            let (v, a) = self.rows[r].terms[k];
            let (l, u) = (self.dom.lower[v], self.dom.upper[v]);
            let (cmin, cmax) = if a > 0.0 { (a * l, a * u) } else { (a * u, a * l) };
            let mut new_lo = f64::NEG_INFINITY;
            let mut new_hi = f64::INFINITY;
            if need_hi {
                let rest = if cmin.is_finite() {
                    (min_inf == 0).then_some(min_fin - cmin)
                } else {
                    Some(min_fin)
                };
                if let Some(rest) = rest {
                    // a x ≤ hi − rest (+ tol)
                    let b = (hi_rhs - rest + self.tol) / a;
                    if a > 0.0 {
                        new_hi = b;
                    } else {
                        new_lo = b;
                    }
                }
            }
            if need_lo {
                let rest = if cmax.is_finite() {
                    (max_inf == 0).then_some(max_fin - cmax)
                } else {
                    Some(max_fin)
                };
                if let Some(rest) = rest {
                    // a x ≥ lo − rest (− tol)
                    let b = (lo_rhs - rest - self.tol) / a;
                    if a > 0.0 {
                        new_lo = new_lo.max(b);
                    } else {
                        new_hi = new_hi.min(b);
                    }
                }
            }
            if lo_rhs == hi_rhs && !self.binary[v] && l < u && new_hi - new_lo <= 2.0 * self.tol / a.abs() * (1.0 + 1e-9) {
                // every other term is fixed: the row pins v, up to tolerance
                let p = 0.5 * (new_lo + new_hi);
                if p < l - self.tol || p > u + self.tol {
                    return false;
                }
                let p = p.clamp(l, u);
                self.set(v, p, p);
                continue;
            }
            if (new_lo > l || new_hi < u) && !self.tighten(v, new_lo, new_hi) {
                return false;
            }
        }
        true
    }
}

/// Tighten `dom` to a fixpoint of single-constraint interval reasoning over
/// the constraints of `problem`. Feasible points of `problem` inside `dom`
/// are never removed; on conflict `dom` is left partially tightened.
pub fn propagate(problem: &MipProblem, dom: &mut Domains, tol: f64) -> Propagation {
    let mut e = Engine::with_domains(problem, dom.clone(), tol);
    let out = e.propagate();
    *dom = e.dom;
    out
}

//! Depth-first branch and bound over the binary variables.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::mip::{check_assignment, Assignment, MipProblem, Relation, Role, VarKind};

use super::leaf::{complete, midpoint, satisfies, LeafLp};
use super::propagate::{Engine, Propagation, Row};
use super::{BranchRule, LeafDecision, SolveOutcome, SolveStats, SolverConfig};

/// Substituted rows longer than this are not added.
const SUBSTITUTION_BUDGET: usize = 4096;
/// Validator rounds allowed at one leaf before it is abandoned.
const MAX_LEAF_ROUNDS: usize = 64;

pub(crate) type Validator<'v> = dyn Fn(&Assignment) -> LeafDecision + Sync + 'v;

enum Stop {
    Timeout,
    NodeLimit,
    Aborted,
}

enum Leaf {
    Found(Assignment),
    Exhausted,
    Stop(Stop),
}

enum Run {
    Found(Assignment),
    Exhausted,
    Stop(Stop),
}

#[derive(Clone)]
pub(crate) struct Tree<'p> {
    problem: &'p MipProblem,
    engine: Engine,
    /// Original constraints and cuts; substituted rows are redundant.
    core: Vec<bool>,
    cut_rows: Vec<usize>,
    order: Vec<usize>,
    first_value: Vec<f64>,
    tol: f64,
    pub stats: SolveStats,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Rows over several defined variables, rewritten in terms of the
/// variables those definitions bottom out in.
fn substituted_rows(problem: &MipProblem) -> Vec<Row> {
    let vars = problem.variables();
    let mut def: Vec<Option<usize>> = vec![None; vars.len()];
    let mut def_var: Vec<Option<usize>> = vec![None; problem.constraints().len()];
    for (r, c) in problem.constraints().iter().enumerate() {
        if c.relation != Relation::Eq {
            continue;
        }
        let v = c
            .terms
            .iter()
            .filter(|(v, _)| vars[v.0].kind == VarKind::Continuous)
            .map(|(v, _)| v.0)
            .max();
        if let Some(v) = v {
            if def[v].is_none() {
                def[v] = Some(r);
                def_var[r] = Some(v);
            }
        }
    }
    let mut out = Vec::new();
    for (r, c) in problem.constraints().iter().enumerate() {
        if def_var[r].is_some() {
            continue;
        }
        let defined = c.terms.iter().filter(|(v, _)| def[v.0].is_some()).count();
        if defined < 2 {
            continue;
        }
        let mut acc: BTreeMap<usize, f64> = c.terms.iter().map(|(v, a)| (v.0, *a)).collect();
        let mut constant = 0.0;
        let mut ok = true;
        // definitions only reference lower-indexed continuous variables, so
        // eliminating from the top visits each variable once
        while let Some(v) = acc.keys().rev().copied().find(|v| def[*v].is_some()) {
            let coeff = acc.remove(&v).expect("present");
            let d = &problem.constraints()[def[v].expect("defined")];
            let a_v = d.terms.iter().find(|(w, _)| w.0 == v).expect("defining term").1;
            for (w, a) in &d.terms {
                if w.0 != v {
                    *acc.entry(w.0).or_insert(0.0) -= coeff * a / a_v;
                }
            }
            constant += coeff * d.rhs / a_v;
            if acc.len() > SUBSTITUTION_BUDGET {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let terms: Vec<(usize, f64)> = acc.into_iter().filter(|(_, a)| a.abs() > 1e-12).collect();
        if terms.is_empty() {
            continue;
        }
        out.push(Row::from_relation(terms, c.relation, c.rhs - constant));
    }
    out
}

fn branching_order(problem: &MipProblem, rule: BranchRule, seed: u64, rows: &[Row]) -> Vec<usize> {
    let mut bins: Vec<usize> = (0..problem.variables().len())
        .filter(|&v| problem.variables()[v].kind == VarKind::Binary)
        .collect();
    match rule {
        BranchRule::FirstUnfixed => {}
        BranchRule::LayerOrder => {
            bins.sort_by_key(|&v| match problem.position(crate::mip::VarId(v)) {
                Some(p) => (0, p.layer, p.unit, v),
                None => (1, 0, 0, v),
            });
        }
        BranchRule::MostFractionalBoundImpact => {
            let mut score = vec![0.0f64; problem.variables().len()];
            for r in rows {
                let total: f64 = r.terms.iter().map(|(_, a)| a.abs()).sum();
                for (v, a) in &r.terms {
                    score[*v] += a.abs() / total;
                }
            }
            bins.sort_by(|&a, &b| {
                score[b]
                    .total_cmp(&score[a])
                    .then_with(|| splitmix(seed ^ a as u64).cmp(&splitmix(seed ^ b as u64)))
            });
        }
    }
    bins
}

impl<'p> Tree<'p> {
    pub fn new(problem: &'p MipProblem, cfg: &SolverConfig) -> Self {
        let mut engine = Engine::new(problem, cfg.feasibility_tol);
        let mut core = vec![true; engine.rows.len()];
        for row in substituted_rows(problem) {
            engine.add_row(row);
            core.push(false);
        }
        let order = branching_order(problem, cfg.branch_rule, cfg.seed, &engine.rows);
        let first_value = (0..problem.variables().len())
            .map(|v| match problem.position(crate::mip::VarId(v)).map(|p| p.role) {
                Some(Role::OutputSelector) => 1.0,
                _ => 0.0,
            })
            .collect();
        Self {
            problem,
            engine,
            core,
            cut_rows: Vec::new(),
            order,
            first_value,
            tol: cfg.feasibility_tol,
            stats: SolveStats::default(),
        }
    }

    /// Propagate at the root. Returns false if the problem is infeasible.
    pub fn root(&mut self) -> bool {
        self.engine.propagate() == Propagation::Fixpoint
    }

    fn pick(&self) -> Option<usize> {
        self.order.iter().copied().find(|&v| !self.engine.dom.is_fixed(v))
    }

    fn branch(&mut self, v: usize, value: f64) -> bool {
        self.engine.fix(v, value) && self.engine.propagate() == Propagation::Fixpoint
    }

    fn leaf(&mut self, validator: &Validator<'_>, deadline: Option<Instant>) -> Leaf {
        for _ in 0..MAX_LEAF_ROUNDS {
            for k in 0..self.cut_rows.len() {
                self.engine.enqueue(self.cut_rows[k]);
            }
            if self.engine.propagate() != Propagation::Fixpoint {
                return Leaf::Exhausted;
            }
            let core_rows: Vec<&Row> = self
                .engine
                .rows
                .iter()
                .zip(&self.core)
                .filter(|(_, c)| **c)
                .map(|(r, _)| r)
                .collect();
            let mut values = midpoint(&self.engine.dom);
            if !satisfies(&core_rows, &values, self.tol) {
                self.stats.leaf_lps += 1;
                match complete(&core_rows, &self.engine.dom, self.tol, deadline) {
                    LeafLp::Feasible(v) => values = v,
                    LeafLp::Infeasible => return Leaf::Exhausted,
                    LeafLp::Interrupted => return Leaf::Stop(Stop::Timeout),
                }
            }
            for (v, var) in self.problem.variables().iter().enumerate() {
                if var.kind == VarKind::Binary {
                    values[v] = values[v].round();
                }
            }
            let cuts_ok = self.cut_rows.iter().all(|&r| self.engine.rows[r].violation(&values) <= self.tol);
            let a = Assignment::new(values);
            let report = check_assignment(self.problem, &a, self.tol).expect("assignment covers every variable");
            if !report.feasible || !cuts_ok {
                tracing::warn!(violations = report.violations.len(), "leaf solution failed the feasibility check");
                return Leaf::Exhausted;
            }
            match validator(&a) {
                LeafDecision::Accept => return Leaf::Found(a),
                LeafDecision::AcceptWith(b) => return Leaf::Found(b),
                LeafDecision::Reject(cuts) => {
                    self.stats.spurious_rejected += 1;
                    for cut in cuts {
                        self.stats.cuts_added += 1;
                        let r = self.engine.add_row(cut.to_row());
                        self.core.push(true);
                        self.cut_rows.push(r);
                    }
                }
            }
        }
        tracing::warn!("leaf abandoned after repeated rejections");
        Leaf::Exhausted
    }

    fn run(
        &mut self,
        validator: &Validator<'_>,
        deadline: Option<Instant>,
        max_nodes: Option<u64>,
        abort: &dyn Fn() -> bool,
    ) -> Run {
        struct Frame {
            mark: usize,
            var: usize,
            alt: f64,
            tried: bool,
        }
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            // at a propagated, conflict-free node
            self.stats.nodes += 1;
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Run::Stop(Stop::Timeout);
            }
            if max_nodes.is_some_and(|m| self.stats.nodes > m) {
                return Run::Stop(Stop::NodeLimit);
            }
            if self.stats.nodes.is_multiple_of(256) && abort() {
                return Run::Stop(Stop::Aborted);
            }
            let descended = match self.pick() {
                None => match self.leaf(validator, deadline) {
                    Leaf::Found(a) => return Run::Found(a),
                    Leaf::Stop(s) => return Run::Stop(s),
                    Leaf::Exhausted => false,
                },
                Some(v) => {
                    let first = self.first_value[v];
                    let mark = self.engine.mark();
                    stack.push(Frame {
                        mark,
                        var: v,
                        alt: 1.0 - first,
                        tried: false,
                    });
                    self.stats.max_depth = self.stats.max_depth.max(stack.len() as u64);
                    self.branch(v, first)
                }
            };
            if descended {
                continue;
            }
            // backtrack to the next open alternative
            loop {
                let Some(f) = stack.last_mut() else {
                    return Run::Exhausted;
                };
                self.engine.undo(f.mark);
                if f.tried {
                    stack.pop();
                    continue;
                }
                f.tried = true;
                let (v, alt) = (f.var, f.alt);
                if self.branch(v, alt) {
                    break;
                }
            }
        }
    }

    /// Fixings that split the tree below the root into at least `want`
    /// subtrees (fewer if the tree is smaller), in depth-first order.
    fn split(&mut self, want: usize) -> Vec<Vec<(usize, f64)>> {
        let mut frontier: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        let root = self.engine.mark();
        while frontier.len() < want {
            let mut next = Vec::new();
            let mut grew = false;
            for path in frontier {
                self.engine.undo(root);
                let ok = path.iter().all(|&(v, x)| self.branch(v, x));
                if !ok {
                    continue;
                }
                match self.pick() {
                    None => next.push(path),
                    Some(v) => {
                        grew = true;
                        let first = self.first_value[v];
                        for x in [first, 1.0 - first] {
                            let mut p = path.clone();
                            p.push((v, x));
                            next.push(p);
                        }
                    }
                }
            }
            self.engine.undo(root);
            frontier = next;
            if !grew {
                break;
            }
        }
        frontier
    }
}

pub(crate) fn search(problem: &MipProblem, cfg: &SolverConfig, validator: &Validator<'_>) -> (SolveOutcome, SolveStats) {
    let start = Instant::now();
    let deadline = start.checked_add(cfg.timeout);
    let mut tree = Tree::new(problem, cfg);
    let finish = |outcome: SolveOutcome, mut stats: SolveStats, visits: u64| {
        stats.propagations = visits;
        stats.wall_time = start.elapsed();
        tracing::debug!(?stats, "search finished");
        (outcome, stats)
    };
    if !tree.root() {
        let visits = tree.engine.row_visits;
        let mut stats = tree.stats.clone();
        stats.nodes = 1;
        return finish(SolveOutcome::Infeasible, stats, visits);
    }
    tree.engine.fold_fixed();

    if cfg.workers <= 1 {
        let run = tree.run(validator, deadline, cfg.max_nodes, &|| false);
        let visits = tree.engine.row_visits;
        return finish(to_outcome(run), tree.stats.clone(), visits);
    }

    let paths = tree.split(cfg.workers * 4);
    let best = AtomicUsize::new(usize::MAX);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build();
    let work = |(i, path): (usize, &Vec<(usize, f64)>)| {
        let mut t = tree.clone();
        let ok = path.iter().all(|&(v, x)| t.branch(v, x));
        let run = if !ok {
            Run::Exhausted
        } else {
            let abort = || best.load(Ordering::Relaxed) < i;
            t.run(validator, deadline, cfg.max_nodes, &abort)
        };
        if matches!(run, Run::Found(_)) {
            best.fetch_min(i, Ordering::Relaxed);
        }
        (run, t.stats, t.engine.row_visits)
    };
    let results: Vec<(Run, SolveStats, u64)> = match pool {
        Ok(pool) => pool.install(|| paths.par_iter().enumerate().map(work).collect()),
        Err(e) => {
            tracing::warn!(error = %e, "thread pool unavailable; searching sequentially");
            paths.iter().enumerate().map(work).collect()
        }
    };
    let mut stats = SolveStats::default();
    let mut visits = 0;
    let mut outcome = None;
    let mut stopped = None;
    for (run, s, v) in results {
        stats.merge(&s);
        visits += v;
        match run {
            Run::Found(a) if outcome.is_none() => outcome = Some(SolveOutcome::Feasible(a)),
            Run::Stop(Stop::Timeout) => stopped = stopped.or(Some(SolveOutcome::Timeout)),
            Run::Stop(Stop::NodeLimit) => stopped = stopped.or(Some(SolveOutcome::NodeLimit)),
            _ => {}
        }
    }
    let outcome = outcome.or(stopped).unwrap_or(SolveOutcome::Infeasible);
    finish(outcome, stats, visits)
}

fn to_outcome(run: Run) -> SolveOutcome {
    match run {
        Run::Found(a) => SolveOutcome::Feasible(a),
        Run::Exhausted => SolveOutcome::Infeasible,
        Run::Stop(Stop::Timeout) | Run::Stop(Stop::Aborted) => SolveOutcome::Timeout,
        Run::Stop(Stop::NodeLimit) => SolveOutcome::NodeLimit,
    }
}

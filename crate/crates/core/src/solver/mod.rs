//! Complete branch-and-bound feasibility search over binary indicators.
//!
//! Nodes are pruned by interval constraint propagation. Once every binary
//! is fixed the remaining continuous problem is linear and is settled by a
//! midpoint probe or, failing that, a small LP, so an exhausted search
//! proves infeasibility.

mod leaf;
mod propagate;
mod search;
mod verify;

pub use leaf::solve_fixed;
pub use propagate::{propagate, Domains, Propagation};
pub use verify::{extract_counterexample, repair_input, verify, Counterexample, Verdict, VerifyConfig, VerifyReport};

use std::time::Duration;

use serde::{Serialize, Serializer};

use crate::mip::{Assignment, MipProblem, Relation, VarId};

/// Order in which binary variables are branched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Lowest variable index first.
    FirstUnfixed,
    /// Variables with the largest normalized coefficient mass first; ties
    /// are broken by the seed.
    MostFractionalBoundImpact,
    /// Network order: input indicators, then each layer in turn, then the
    /// output selectors.
    #[default]
    LayerOrder,
}

impl std::str::FromStr for BranchRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first-unfixed" => Ok(BranchRule::FirstUnfixed),
            "most-fractional-bound-impact" | "bound-impact" => Ok(BranchRule::MostFractionalBoundImpact),
            "layer-order" => Ok(BranchRule::LayerOrder),
            other => Err(format!("unknown branch rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    #[serde(serialize_with = "secs")]
    pub timeout: Duration,
    pub feasibility_tol: f64,
    pub branch_rule: BranchRule,
    pub max_nodes: Option<u64>,
    pub workers: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(120),
            feasibility_tol: 1e-6,
            branch_rule: BranchRule::LayerOrder,
            max_nodes: None,
            workers: 1,
            seed: 0,
        }
    }
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: u64,
    /// Constraint visits during propagation.
    pub propagations: u64,
    pub leaf_lps: u64,
    pub max_depth: u64,
    pub spurious_rejected: u64,
    pub cuts_added: u64,
    #[serde(serialize_with = "secs")]
    pub wall_time: Duration,
}

impl SolveStats {
    fn merge(&mut self, o: &SolveStats) {
        self.nodes += o.nodes;
        self.propagations += o.propagations;
        self.leaf_lps += o.leaf_lps;
        self.max_depth = self.max_depth.max(o.max_depth);
        self.spurious_rejected += o.spurious_rejected;
        self.cuts_added += o.cuts_added;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Feasible(Assignment),
    Infeasible,
    Timeout,
    /// `max_nodes` was reached before the search finished.
    NodeLimit,
}

/// A linear constraint added during search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// What the caller makes of a feasible leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafDecision {
    Accept,
    /// Accept a different, already validated assignment.
    AcceptWith(Assignment),
    /// Reject the leaf; the cuts must exclude it and are kept for the rest of
    /// the search.
    Reject(Vec<Cut>),
}

/// Search for any feasible assignment.
pub fn solve(p: &MipProblem, cfg: &SolverConfig) -> (SolveOutcome, SolveStats) {
    search::search(p, cfg, &|_: &Assignment| LeafDecision::Accept)
}

/// Search for a feasible assignment that `validate` accepts.
pub fn solve_with(
    p: &MipProblem,
    cfg: &SolverConfig,
    validate: &(dyn Fn(&Assignment) -> LeafDecision + Sync),
) -> (SolveOutcome, SolveStats) {
    search::search(p, cfg, validate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::check_assignment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_polytope_is_infeasible() {
        let mut p = MipProblem::new();
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY, None).unwrap();
        p.add_constraint("a", [(x, 1.0)], Relation::Le, 0.0).unwrap();
        p.add_constraint("b", [(x, 1.0)], Relation::Ge, 1.0).unwrap();
        assert_eq!(solve(&p, &SolverConfig::default()).0, SolveOutcome::Infeasible);
    }

    #[test]
    fn lone_binary_is_feasible() {
        let mut p = MipProblem::new();
        p.add_binary("b", None).unwrap();
        let SolveOutcome::Feasible(a) = solve(&p, &SolverConfig::default()).0 else {
            panic!("expected a solution")
        };
        assert!(a.values[0] == 0.0 || a.values[0] == 1.0);
    }

    #[test]
    fn needs_lp_at_leaf() {
        // x + y = 1, x − y = 0.5: propagation alone cannot settle it
        let mut p = MipProblem::new();
        let x = p.add_continuous("x", -5.0, 5.0, None).unwrap();
        let y = p.add_continuous("y", -5.0, 5.0, None).unwrap();
        let b = p.add_binary("b", None).unwrap();
        p.add_constraint("s", [(x, 1.0), (y, 1.0)], Relation::Eq, 1.0).unwrap();
        p.add_constraint("d", [(x, 1.0), (y, -1.0), (b, 1.0)], Relation::Eq, 0.5).unwrap();
        let (out, _) = solve(&p, &SolverConfig::default());
        let SolveOutcome::Feasible(a) = out else { panic!("expected a solution") };
        assert!(check_assignment(&p, &a, 1e-6).unwrap().feasible);
    }

    /// Independent referee: enumerate every binary assignment and solve the
    /// remaining LP directly.
    fn brute_force(p: &MipProblem) -> bool {
        let bins: Vec<usize> = (0..p.variables().len())
            .filter(|&v| p.variables()[v].kind == crate::mip::VarKind::Binary)
            .collect();
        (0..1u32 << bins.len()).any(|mask| {
            let mut vals = vec![0.0; p.variables().len()];
            for (k, &v) in bins.iter().enumerate() {
                vals[v] = f64::from((mask >> k) & 1);
            }
            solve_fixed(p, &[], &Assignment::new(vals), 1e-6).is_some()
        })
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> MipProblem {
        let mut p = MipProblem::new();
        let nb = rng.gen_range(1..6);
        let nc = rng.gen_range(0..4);
        let mut vars = Vec::new();
        for i in 0..nb {
            vars.push(p.add_binary(format!("b{i}"), None).unwrap());
        }
        for i in 0..nc {
            vars.push(p.add_continuous(format!("x{i}"), -3.0, 3.0, None).unwrap());
        }
        for r in 0..rng.gen_range(1..6) {
            let mut terms = Vec::new();
            for v in &vars {
                let a = f64::from(rng.gen_range(-3i32..=3));
                if rng.gen_bool(0.6) && a != 0.0 {
                    terms.push((*v, a));
                }
            }
            if terms.is_empty() {
                continue;
            }
            let rel = [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)];
            let rhs = f64::from(rng.gen_range(-3i32..=3)) * 0.5;
            p.add_constraint(format!("c{r}"), terms, rel, rhs).unwrap();
        }
        p
    }

    #[test]
    fn matches_brute_force_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut feasible = 0;
        for _ in 0..100 {
            let p = random_problem(&mut rng);
            let expected = brute_force(&p);
            let (out, _) = solve(&p, &SolverConfig::default());
            match out {
                SolveOutcome::Feasible(a) => {
                    assert!(expected);
                    assert!(check_assignment(&p, &a, 1e-6).unwrap().feasible);
                    feasible += 1;
                }
                SolveOutcome::Infeasible => assert!(!expected),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(feasible > 10 && feasible < 90, "{feasible} feasible");
    }

    #[test]
    fn parallel_agrees_with_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let p = random_problem(&mut rng);
            let seq = solve(&p, &SolverConfig::default()).0;
            let par = solve(
                &p,
                &SolverConfig {
                    workers: 3,
                    ..SolverConfig::default()
                },
            )
            .0;
            assert_eq!(
                matches!(seq, SolveOutcome::Feasible(_)),
                matches!(par, SolveOutcome::Feasible(_))
            );
        }
    }

    #[test]
    fn rejected_leaves_are_cut_off() {
        // accept only the assignment with b0 = b1 = 1
        let mut p = MipProblem::new();
        p.add_binary("b0", None).unwrap();
        p.add_binary("b1", None).unwrap();
        let problem = p.clone();
        let validate = move |a: &Assignment| {
            if a.values == [1.0, 1.0] {
                LeafDecision::Accept
            } else {
                LeafDecision::Reject(vec![Cut::no_good(&problem, a)])
            }
        };
        let (out, stats) = solve_with(&p, &SolverConfig::default(), &validate);
        assert_eq!(out, SolveOutcome::Feasible(Assignment::new(vec![1.0, 1.0])));
        assert_eq!(stats.spurious_rejected, 3);
    }
}

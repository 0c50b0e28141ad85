//! Property verification: encode, search, and validate every candidate
//! counterexample by exact forward evaluation.

use serde::Serialize;

use crate::encoder::{encode_network, Encoding, EncodingConfig, SignSite};
use crate::error::{Error, Result};
use crate::mip::{Assignment, MipProblem, Relation, Role};
use crate::model::{sign, ActivationTrace, Model};
use crate::property::{l1_distance, InputSet, Property};

use super::{solve_fixed, solve_with, Cut, LeafDecision, SolveOutcome, SolveStats, SolverConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub solver: SolverConfig,
    pub encoding: EncodingConfig,
}

/// An input in the input set whose exactly evaluated output violates the
/// assertion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub input: Vec<f64>,
    pub trace: ActivationTrace,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    CounterexampleFound(Counterexample),
    Timeout,
    /// The node limit was reached.
    Unknown,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "HOLDS",
            Verdict::CounterexampleFound(_) => "COUNTEREXAMPLE",
            Verdict::Timeout => "TIMEOUT",
            Verdict::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub stats: SolveStats,
    /// Set when the property holds without search: the assertion admits
    /// every output, or the input set is empty.
    pub trivial: Option<&'static str>,
}

/// Read the input variables of `a` and recompute the activations exactly.
pub fn extract_counterexample(p: &MipProblem, a: &Assignment, m: &Model) -> Result<(Vec<f64>, ActivationTrace)> {
    if a.values.len() != p.variables().len() {
        return Err(Error::MissingValue {
            expected: p.variables().len(),
            found: a.values.len(),
        });
    }
    let inputs = p.vars_with_role(Role::Input);
    if inputs.len() != m.input_dim() {
        return Err(Error::Dimension {
            context: "input variables",
            expected: m.input_dim(),
            found: inputs.len(),
        });
    }
    let x: Vec<f64> = inputs.iter().map(|v| a.get(*v)).collect();
    let trace = m.forward_trace(&x)?;
    Ok((x, trace))
}

/// Move `x` into `s` where solver tolerances left it just outside.
///
/// Boxes and ℓ∞ balls are clamped coordinate-wise, then nudged one ulp at a
/// time until the exact membership test passes. ℓ1 balls are shrunk toward
/// the center. Polytopes are returned unchanged.
pub fn repair_input(s: &InputSet, x: &[f64]) -> Vec<f64> {
    let nudge = |v: f64, lo: f64, hi: f64, ok: &dyn Fn(f64) -> bool| {
        let mut v = v.clamp(lo, hi);
        for _ in 0..8 {
            if ok(v) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            v = if v > mid { v.next_down() } else { v.next_up() };
        }
        v
    };
    match s {
        InputSet::Box { lower, upper } => x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect(),
        InputSet::InfBall { center, radius } => x
            .iter()
            .zip(center)
            .map(|(v, c)| nudge(*v, c - radius, c + radius, &|w| (w - c).abs() <= *radius))
            .collect(),
        InputSet::OneBall { center, radius } => {
            let mut y = x.to_vec();
            let mut factor = 1.0;
            for _ in 0..60 {
                let d = l1_distance(&y, center);
                if d <= *radius {
                    break;
                }
                factor *= (radius / d) * (1.0 - 1e-12);
                y = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| c + (v - c) * factor)
                    .collect();
                if factor < 1e-3 {
                    y = center.clone();
                }
            }
            y
        }
        InputSet::Polytope { .. } => x.to_vec(),
    }
}

fn is_counterexample(m: &Model, prop: &Property, x: &[f64]) -> bool {
    if !prop.input.contains(x).unwrap_or(false) || x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match m.forward(x) {
        Ok(y) => !prop.output.satisfied_by(&y).unwrap_or(true),
        Err(_) => false,
    }
}

fn read_input(enc: &Encoding, a: &Assignment, prop: &Property) -> Vec<f64> {
    let x: Vec<f64> = enc.input_vars().iter().map(|v| a.get(*v)).collect();
    repair_input(&prop.input, &x)
}

/// Pre-activation of a site recomputed by the forward pass.
fn forward_pre(trace: &ActivationTrace, site: &SignSite) -> f64 {
    trace.pre_activation(site.block)[site.unit] - site.shift
}

/// Decide a feasible leaf.
///
/// A leaf whose inputs validate is accepted. Otherwise the first sign unit
/// whose indicator disagrees with the forward pass is inspected: when the
/// indicator claims a negative pre-activation that forward evaluation puts
/// at or above zero and the unit has a known gap, the cut
/// `pre − shift ≤ −gap` (active when the indicator is set) removes the
/// boundary solution without losing any network behavior. Failing that,
/// the linear program for this indicator pattern is re-solved with every
/// negative unit pushed strictly below zero; if that still yields no valid
/// input the pattern is excluded by a no-good cut.
fn decide(enc: &Encoding, m: &Model, prop: &Property, cfg: &VerifyConfig, a: &Assignment) -> LeafDecision {
    let tol = cfg.solver.feasibility_tol;
    let x = read_input(enc, a, prop);
    if is_counterexample(m, prop, &x) {
        return LeafDecision::Accept;
    }
    tracing::debug!("rejecting spurious leaf");
    if let Ok(trace) = m.forward_trace(&x) {
        for site in &enc.sign_sites {
            let Some(beta) = site.beta else { continue };
            let claims_negative = a.get(beta) == 1.0;
            let fwd = forward_pre(&trace, site);
            let forward_negative = sign(fwd) < 0;
            if claims_negative == forward_negative {
                continue;
            }
            if let (true, Some(gap)) = (claims_negative, site.gap) {
                if a.get(site.pre) - site.shift > -gap + tol {
                    // β = 1 ⟹ pre ≤ shift − gap, written pre + (u + gap)β ≤ u + shift
                    return LeafDecision::Reject(vec![Cut {
                        terms: vec![(site.pre, 1.0), (beta, site.upper + gap)],
                        relation: Relation::Le,
                        rhs: site.upper + site.shift,
                    }]);
                }
            }
            break;
        }
    }
    let strict: Vec<Cut> = enc
        .sign_sites
        .iter()
        .filter_map(|s| {
            let beta = s.beta?;
            (a.get(beta) == 1.0).then(|| Cut {
                terms: vec![(s.pre, 1.0)],
                relation: Relation::Le,
                rhs: s.shift - s.gap.unwrap_or(cfg.encoding.tau_strict),
            })
        })
        .collect();
    if let Some(b) = solve_fixed(&enc.problem, &strict, a, tol) {
        if is_counterexample(m, prop, &read_input(enc, &b, prop)) {
            return LeafDecision::AcceptWith(b);
        }
    }
    LeafDecision::Reject(vec![Cut::no_good(&enc.problem, a)])
}

/// Prove `prop` for `m` or return a validated counterexample.
pub fn verify(m: &Model, prop: &Property, cfg: &VerifyConfig) -> Result<VerifyReport> {
    prop.check_dims(m.input_dim(), m.output_dim())?;
    let enc = match encode_network(m, prop, &cfg.encoding) {
        Ok(enc) => enc,
        Err(Error::VacuousAssertion) => {
            return Ok(VerifyReport {
                verdict: Verdict::Holds,
                stats: SolveStats::default(),
                trivial: Some("assertion admits every output"),
            })
        }
        Err(Error::EmptyInputSet) => {
            return Ok(VerifyReport {
                verdict: Verdict::Holds,
                stats: SolveStats::default(),
                trivial: Some("input set is empty"),
            })
        }
        Err(e) => return Err(e),
    };
    let validate = |a: &Assignment| decide(&enc, m, prop, cfg, a);
    let (outcome, stats) = solve_with(&enc.problem, &cfg.solver, &validate);
    if stats.spurious_rejected > 0 {
        tracing::info!(
            rejected = stats.spurious_rejected,
            cuts = stats.cuts_added,
            "spurious solutions rejected"
        );
    }
    let verdict = match outcome {
        SolveOutcome::Feasible(a) => {
            let x = read_input(&enc, &a, prop);
            debug_assert!(is_counterexample(m, prop, &x), "validator accepted an invalid input");
            let trace = m.forward_trace(&x)?;
            Verdict::CounterexampleFound(Counterexample {
                output: trace.output().to_vec(),
                input: x,
                trace,
            })
        }
        SolveOutcome::Infeasible => Verdict::Holds,
        SolveOutcome::Timeout => Verdict::Timeout,
        SolveOutcome::NodeLimit => Verdict::Unknown,
    };
    Ok(VerifyReport {
        verdict,
        stats,
        trivial: None,
    })
}

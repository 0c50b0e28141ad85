//! Interval bound propagation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{batch_norm, Block, Model};
use crate::property::{InputRelation, InputSet};

/// Integers up to this magnitude are summed exactly in `f64`.
const EXACT_LIMIT: f64 = 1e15;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn is_integral(&self) -> bool {
        self.lo.fract() == 0.0 && self.hi.fract() == 0.0 && self.lo.abs() < EXACT_LIMIT && self.hi.abs() < EXACT_LIMIT
    }
}

/// Interval hull of `Σ a_k x_k + bias` for `x_k ∈ xs[k]`.
///
/// When every coefficient, endpoint and the bias are small integers the sum
/// is exact. Otherwise the result is widened by a bound on the accumulated
/// rounding error of both this computation and any left-to-right evaluation
/// of the same sum, so it contains every floating-point and every exact
/// value.
pub fn interval_dot(terms: impl IntoIterator<Item = (f64, Interval)>, bias: f64) -> Interval {
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut mag = bias.abs();
    let mut n = 1usize;
    let mut exact = bias.fract() == 0.0 && bias.abs() < EXACT_LIMIT;
    for (a, x) in terms {
        if a == 0.0 {
            continue;
        }
        let (p, q) = (a * x.lo, a * x.hi);
        lo += p.min(q);
        hi += p.max(q);
        mag += p.abs().max(q.abs());
        n += 1;
        exact &= a.fract() == 0.0 && x.is_integral();
    }
    lo += bias;
    hi += bias;
    if exact && mag < EXACT_LIMIT {
        return Interval::new(lo, hi);
    }
    let pad = 2.0 * (n as f64 + 2.0) * f64::EPSILON * mag + f64::MIN_POSITIVE;
    Interval::new(lo - pad, hi + pad)
}

/// Sound intervals for every value in the network.
///
/// `layer(0)` holds the input hull; `layer(i + 1)` holds the outputs of block
/// `i`. The pre-activation of block `i` is `layer(i)`, shifted by the
/// threshold for an input-binarize block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsMap {
    layers: Vec<Vec<Interval>>,
}

impl BoundsMap {
    pub fn input(&self) -> &[Interval] {
        &self.layers[0]
    }

    pub fn layer(&self, layer: usize) -> &[Interval] {
        &self.layers[layer]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn block_output(&self, block: usize) -> &[Interval] {
        &self.layers[block + 1]
    }

    pub fn output(&self) -> &[Interval] {
        self.layers.last().expect("at least the input layer")
    }

    /// Pre-activation interval of every unit of a sign-like block.
    pub fn sign_pre_activation(&self, model: &Model, block: usize) -> Option<Vec<Interval>> {
        match &model.blocks()[block] {
            Block::Sign { .. } => Some(self.layers[block].clone()),
            Block::InputBinarize { threshold, .. } => Some(
                self.layers[block]
                    .iter()
                    .map(|x| Interval::new(x.lo - threshold, x.hi - threshold))
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Per-coordinate hull of an input set. Polytopes are bounded by solving
/// two linear programs per coordinate.
pub fn input_hull(s: &InputSet) -> Result<Vec<Interval>> {
    s.validate()?;
    if let Some((lo, hi)) = s.box_hull() {
        return Ok(lo.into_iter().zip(hi).map(|(l, h)| Interval::new(l, h)).collect());
    }
    let InputSet::Polytope { dim, rows } = s else {
        unreachable!("box_hull covers every other kind")
    };
    let mut out = Vec::with_capacity(*dim);
    for j in 0..*dim {
        let lo = polytope_extreme(*dim, rows, j, microlp::OptimizationDirection::Minimize)?;
        let hi = polytope_extreme(*dim, rows, j, microlp::OptimizationDirection::Maximize)?;
        let pad = |v: f64| 1e-9 * (1.0 + v.abs());
        out.push(Interval::new(lo - pad(lo), hi + pad(hi)));
    }
    Ok(out)
}

fn polytope_extreme(
    dim: usize,
    rows: &[crate::property::InputRow],
    j: usize,
    dir: microlp::OptimizationDirection,
) -> Result<f64> {
    let mut lp = microlp::Problem::new(dir);
    let vars: Vec<_> = (0..dim)
        .map(|k| lp.add_var(if k == j { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for r in rows {
        let expr: Vec<_> = r
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, a)| (vars[k], *a))
            .collect();
        let op = match r.relation {
            InputRelation::Le => microlp::ComparisonOp::Le,
            InputRelation::Eq => microlp::ComparisonOp::Eq,
        };
        if expr.is_empty() {
            let ok = match r.relation {
                InputRelation::Le => 0.0 <= r.rhs,
                InputRelation::Eq => r.rhs == 0.0,
            };
            if !ok {
                return Err(Error::EmptyInputSet);
            }
            continue;
        }
        lp.add_constraint(expr, op, r.rhs);
    }
    match lp.solve() {
        Ok(outcome) => match outcome.solution() {
            Some(sol) => Ok(sol.var_value_raw(vars[j])),
            None => Err(Error::Encoding("input hull LP interrupted".into())),
        },
        Err(microlp::Error::Infeasible) => Err(Error::EmptyInputSet),
        Err(microlp::Error::Unbounded) => Err(Error::UnboundedInputSet(j)),
        Err(e) => Err(Error::Encoding(format!("input hull LP failed: {e:?}"))),
    }
}

/// Propagate the input hull through every block.
///
/// With `tighten` unset, every sign-like output is taken as `[-1, 1]`
/// regardless of its pre-activation, which reproduces the worst-case
/// `±k` bounds of a binary-linear layer with `k` inputs.
pub fn compute_bounds_with(m: &Model, s: &InputSet, tighten: bool) -> Result<BoundsMap> {
    if s.dim() != m.input_dim() {
        return Err(Error::Dimension {
            context: "input set",
            expected: m.input_dim(),
            found: s.dim(),
        });
    }
    let mut layers = vec![input_hull(s)?];
    for block in m.blocks() {
        let prev = layers.last().expect("input layer present");
        let next = propagate_block(block, prev, tighten);
        layers.push(next);
    }
    Ok(BoundsMap { layers })
}

pub fn compute_bounds(m: &Model, s: &InputSet) -> Result<BoundsMap> {
    compute_bounds_with(m, s, true)
}

fn sign_interval(pre: Interval, tighten: bool) -> Interval {
    if !tighten {
        Interval::new(-1.0, 1.0)
    } else if pre.lo >= 0.0 {
        Interval::point(1.0)
    } else if pre.hi < 0.0 {
        Interval::point(-1.0)
    } else {
        Interval::new(-1.0, 1.0)
    }
}

fn propagate_block(block: &Block, prev: &[Interval], tighten: bool) -> Vec<Interval> {
    match block {
        Block::BinaryLinear { weights, bias } => weights
            .iter()
            .enumerate()
            .map(|(j, row)| {
                interval_dot(
                    row.iter().zip(prev).map(|(q, x)| (f64::from(*q), *x)),
                    bias.as_ref().map_or(0.0, |b| b[j]),
                )
            })
            .collect(),
        Block::RealLinear { weights, bias } => weights
            .iter()
            .enumerate()
            .map(|(j, row)| {
                interval_dot(
                    row.iter().zip(prev).map(|(w, x)| (*w, *x)),
                    bias.as_ref().map_or(0.0, |b| b[j]),
                )
            })
            .collect(),
        Block::BatchNorm {
            alpha,
            gamma,
            mu,
            sigma,
        } => prev
            .iter()
            .enumerate()
            .map(|(k, x)| {
                // every step of batch_norm is monotone under rounding, so the
                // endpoint images bound every forward value
                let a = batch_norm(x.lo, alpha[k], gamma[k], mu[k], sigma[k]);
                let b = batch_norm(x.hi, alpha[k], gamma[k], mu[k], sigma[k]);
                Interval::new(a.min(b), a.max(b))
            })
            .collect(),
        Block::Sign { .. } => prev.iter().map(|x| sign_interval(*x, tighten)).collect(),
        Block::Relu { .. } => prev
            .iter()
            .map(|x| Interval::new(x.lo.max(0.0), x.hi.max(0.0)))
            .collect(),
        Block::Max { groups } => groups
            .iter()
            .map(|g| {
                let lo = g.iter().map(|&k| prev[k].lo).fold(f64::NEG_INFINITY, f64::max);
                let hi = g.iter().map(|&k| prev[k].hi).fold(f64::NEG_INFINITY, f64::max);
                Interval::new(lo, hi)
            })
            .collect(),
        Block::InputBinarize { threshold, .. } => prev
            .iter()
            .map(|x| sign_interval(Interval::new(x.lo - threshold, x.hi - threshold), tighten))
            .collect(),
    }
}

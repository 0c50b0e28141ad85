//! Per-block constraint emitters.
//!
//! Each function appends rows (and any indicator variables it needs) to a
//! [`MipProblem`] for variables the caller has already declared. Constraints
//! on a single variable are expressed as variable bounds by the caller.

use crate::error::{Error, Result};
use crate::mip::{MipProblem, Position, Relation, Role, VarId};
use crate::property::{Halfspace, InputRow, InputSet};

use super::bounds::{interval_dot, Interval};

fn check_interval(l: f64, u: f64) -> Result<()> {
    if l.is_nan() || u.is_nan() || l > u || !l.is_finite() || !u.is_finite() {
        return Err(Error::InvalidBounds { lower: l, upper: u });
    }
    Ok(())
}

/// `out_j − Σ_k w_jk in_k = b_j` for every output unit.
pub fn encode_linear(
    p: &mut MipProblem,
    layer: usize,
    weights: &[Vec<f64>],
    bias: Option<&[f64]>,
    in_vars: &[VarId],
    out_vars: &[VarId],
) -> Result<()> {
    if weights.len() != out_vars.len() {
        return Err(Error::Dimension {
            context: "linear encoding outputs",
            expected: weights.len(),
            found: out_vars.len(),
        });
    }
    for (j, (row, &out)) in weights.iter().zip(out_vars).enumerate() {
        if row.len() != in_vars.len() {
            return Err(Error::Dimension {
                context: "linear encoding inputs",
                expected: row.len(),
                found: in_vars.len(),
            });
        }
        let terms = std::iter::once((out, 1.0)).chain(in_vars.iter().zip(row).map(|(v, w)| (*v, -w)));
        let b = bias.map_or(0.0, |b| b[j]);
        p.add_constraint(format!("lin{layer}_{j}"), terms, Relation::Eq, b)?;
    }
    Ok(())
}

/// Big-M sign encoding of `z = sign(v − shift)` where `v − shift ∈ [l, u]`.
///
/// Emits `l·β ≤ v − shift`, `v − shift ≤ u(1 − β)` and `z = 1 − 2β`; the caller
/// bounds `z` to `[-1, 1]`. With `eliminate_stable`, a pre-activation known
/// to be non-negative (negative) instead yields `z = 1` (`z = -1`) and no
/// indicator. Returns the indicator, if one was created.
#[allow(clippy::too_many_arguments)]
fn encode_sign_like(
    p: &mut MipProblem,
    layer: usize,
    unit: usize,
    v: VarId,
    shift: f64,
    z: VarId,
    l: f64,
    u: f64,
    eliminate_stable: bool,
) -> Result<Option<VarId>> {
    check_interval(l, u)?;
    if eliminate_stable && (l >= 0.0 || u < 0.0) {
        let value = if l >= 0.0 { 1.0 } else { -1.0 };
        p.add_constraint(format!("fix{layer}_{unit}"), [(z, 1.0)], Relation::Eq, value)?;
        return Ok(None);
    }
    let beta = p.add_binary(
        format!("beta{layer}_{unit}"),
        Some(Position {
            layer,
            unit,
            role: Role::Indicator,
        }),
    )?;
    // l·β ≤ v − shift
    p.add_constraint(format!("sgnlo{layer}_{unit}"), [(v, 1.0), (beta, -l)], Relation::Ge, shift)?;
    // v − shift ≤ u(1 − β)
    p.add_constraint(format!("sgnhi{layer}_{unit}"), [(v, 1.0), (beta, u)], Relation::Le, u + shift)?;
    // z = 1 − 2β
    p.add_constraint(format!("sgnz{layer}_{unit}"), [(z, 1.0), (beta, 2.0)], Relation::Eq, 1.0)?;
    Ok(Some(beta))
}

/// Sign activation `z = sign(ẑ)` with `ẑ ∈ [l, u]`.
#[allow(clippy::too_many_arguments)]
pub fn encode_sign(
    p: &mut MipProblem,
    layer: usize,
    unit: usize,
    zhat: VarId,
    z: VarId,
    l: f64,
    u: f64,
    eliminate_stable: bool,
) -> Result<Option<VarId>> {
    encode_sign_like(p, layer, unit, zhat, 0.0, z, l, u, eliminate_stable)
}

/// Input thresholding `z = sign(x − t)` with `x ∈ [l, u]`: the sign encoding
/// applied to `x − t ∈ [l − t, u − t]`.
#[allow(clippy::too_many_arguments)]
pub fn encode_input_binarize(
    p: &mut MipProblem,
    unit: usize,
    x: VarId,
    z: VarId,
    threshold: f64,
    l: f64,
    u: f64,
    eliminate_stable: bool,
) -> Result<Option<VarId>> {
    check_interval(l, u)?;
    encode_sign_like(p, 1, unit, x, threshold, z, l - threshold, u - threshold, eliminate_stable)
}

/// ReLU `z = max(0, ẑ)` with `ẑ ∈ [l, u]`. The caller bounds `z ≥ 0`.
///
/// Unstable units get `z ≤ ẑ − l(1 − β)`, `z ≥ ẑ`, `z ≤ βu`. Stable units
/// become `z = ẑ` (when `l ≥ 0`) or `z = 0` (when `u ≤ 0`) if
/// `eliminate_stable` is set.
#[allow(clippy::too_many_arguments)]
pub fn encode_relu(
    p: &mut MipProblem,
    layer: usize,
    unit: usize,
    zhat: VarId,
    z: VarId,
    l: f64,
    u: f64,
    eliminate_stable: bool,
) -> Result<Option<VarId>> {
    check_interval(l, u)?;
    if eliminate_stable && l >= 0.0 {
        p.add_constraint(format!("relu{layer}_{unit}"), [(z, 1.0), (zhat, -1.0)], Relation::Eq, 0.0)?;
        return Ok(None);
    }
    if eliminate_stable && u <= 0.0 {
        p.add_constraint(format!("relu{layer}_{unit}"), [(z, 1.0)], Relation::Eq, 0.0)?;
        return Ok(None);
    }
    let beta = p.add_binary(
        format!("beta{layer}_{unit}"),
        Some(Position {
            layer,
            unit,
            role: Role::Indicator,
        }),
    )?;
    // z ≤ ẑ − l(1 − β)
    p.add_constraint(
        format!("reluA{layer}_{unit}"),
        [(z, 1.0), (zhat, -1.0), (beta, -l)],
        Relation::Le,
        -l,
    )?;
    // z ≥ ẑ
    p.add_constraint(format!("reluB{layer}_{unit}"), [(z, 1.0), (zhat, -1.0)], Relation::Ge, 0.0)?;
    // z ≤ βu
    p.add_constraint(format!("reluC{layer}_{unit}"), [(z, 1.0), (beta, -u)], Relation::Le, 0.0)?;
    Ok(Some(beta))
}

/// Batch normalization in multiplied-through form
/// `σ z − α y = σγ − αμ`.
#[allow(clippy::too_many_arguments)]
pub fn encode_batch_norm(
    p: &mut MipProblem,
    layer: usize,
    y_vars: &[VarId],
    z_vars: &[VarId],
    alpha: &[f64],
    gamma: &[f64],
    mu: &[f64],
    sigma: &[f64],
) -> Result<()> {
    let n = y_vars.len();
    for (context, len) in [
        ("batch-norm outputs", z_vars.len()),
        ("batch-norm alpha", alpha.len()),
        ("batch-norm gamma", gamma.len()),
        ("batch-norm mu", mu.len()),
        ("batch-norm sigma", sigma.len()),
    ] {
        if len != n {
            return Err(Error::Dimension {
                context,
                expected: n,
                found: len,
            });
        }
    }
    for k in 0..n {
        if !(sigma[k] > 0.0) {
            return Err(Error::Encoding(format!("non-positive sigma {} at unit {k}", sigma[k])));
        }
        p.add_constraint(
            format!("bn{layer}_{k}"),
            [(z_vars[k], sigma[k]), (y_vars[k], -alpha[k])],
            Relation::Eq,
            sigma[k] * gamma[k] - alpha[k] * mu[k],
        )?;
    }
    Ok(())
}

/// `y = max_i x_i` with `x_i ∈ bounds[i]`.
///
/// For a single input this is `y = x_1`. Otherwise one indicator per input
/// selects the maximizer: `y ≤ x_i + (1 − β_i)(u_max,−i − l_i)`, `y ≥ x_i`,
/// `Σ β_i = 1`, where `u_max,−i` is the largest upper bound among the other
/// inputs.
pub fn encode_max(
    p: &mut MipProblem,
    layer: usize,
    unit: usize,
    x_vars: &[VarId],
    y: VarId,
    bounds: &[Interval],
) -> Result<Vec<VarId>> {
    if x_vars.is_empty() {
        return Err(Error::Encoding(format!("empty max group at layer {layer}, unit {unit}")));
    }
    if bounds.len() != x_vars.len() {
        return Err(Error::Dimension {
            context: "max bounds",
            expected: x_vars.len(),
            found: bounds.len(),
        });
    }
    for b in bounds {
        check_interval(b.lo, b.hi)?;
    }
    if x_vars.len() == 1 {
        p.add_constraint(format!("max{layer}_{unit}"), [(y, 1.0), (x_vars[0], -1.0)], Relation::Eq, 0.0)?;
        return Ok(Vec::new());
    }
    let mut betas = Vec::with_capacity(x_vars.len());
    for (i, &x) in x_vars.iter().enumerate() {
        let beta = p.add_binary(
            format!("beta{layer}_{unit}_{i}"),
            Some(Position {
                layer,
                unit,
                role: Role::Indicator,
            }),
        )?;
        let u_other = bounds
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, b)| b.hi)
            .fold(f64::NEG_INFINITY, f64::max);
        let m = u_other - bounds[i].lo;
        // y − x_i + Mβ_i ≤ M
        p.add_constraint(
            format!("maxub{layer}_{unit}_{i}"),
            [(y, 1.0), (x, -1.0), (beta, m)],
            Relation::Le,
            m,
        )?;
        p.add_constraint(format!("maxlb{layer}_{unit}_{i}"), [(y, 1.0), (x, -1.0)], Relation::Ge, 0.0)?;
        betas.push(beta);
    }
    p.add_constraint(
        format!("maxsel{layer}_{unit}"),
        betas.iter().map(|b| (*b, 1.0)),
        Relation::Eq,
        1.0,
    )?;
    Ok(betas)
}

/// Constraints describing the input set beyond the variable bounds the
/// caller derives from its hull: auxiliaries `s_j ≥ |x_j − c_j|` with
/// `Σ s_j ≤ ε` for an ℓ1 ball, or the rows of a polytope. Boxes and ℓ∞
/// balls need nothing further.
pub fn encode_input_set(p: &mut MipProblem, s: &InputSet, x_vars: &[VarId]) -> Result<Vec<VarId>> {
    s.validate()?;
    if s.dim() != x_vars.len() {
        return Err(Error::Dimension {
            context: "input variables",
            expected: s.dim(),
            found: x_vars.len(),
        });
    }
    match s {
        InputSet::Box { .. } | InputSet::InfBall { .. } => Ok(Vec::new()),
        InputSet::OneBall { center, radius } => {
            let mut aux = Vec::with_capacity(center.len());
            for (j, (&x, &c)) in x_vars.iter().zip(center).enumerate() {
                let sj = p.add_continuous(
                    format!("s_{j}"),
                    0.0,
                    *radius,
                    Some(Position {
                        layer: 0,
                        unit: j,
                        role: Role::Auxiliary,
                    }),
                )?;
                p.add_constraint(format!("l1p_{j}"), [(x, -1.0), (sj, 1.0)], Relation::Ge, -c)?;
                p.add_constraint(format!("l1m_{j}"), [(x, 1.0), (sj, 1.0)], Relation::Ge, c)?;
                aux.push(sj);
            }
            p.add_constraint("l1sum", aux.iter().map(|v| (*v, 1.0)), Relation::Le, *radius)?;
            Ok(aux)
        }
        InputSet::Polytope { rows, .. } => {
            for (r, InputRow { coeffs, relation, rhs }) in rows.iter().enumerate() {
                let rel = match relation {
                    crate::property::InputRelation::Le => Relation::Le,
                    crate::property::InputRelation::Eq => Relation::Eq,
                };
                let terms: Vec<(VarId, f64)> = x_vars.iter().zip(coeffs).map(|(v, a)| (*v, *a)).collect();
                if terms.iter().all(|(_, a)| *a == 0.0) {
                    // a zero row is either always true or makes the set empty
                    let ok = match rel {
                        Relation::Eq => *rhs == 0.0,
                        _ => 0.0 <= *rhs,
                    };
                    if !ok {
                        return Err(Error::EmptyInputSet);
                    }
                    continue;
                }
                p.add_constraint(format!("in_{r}"), terms, rel, *rhs)?;
            }
            Ok(Vec::new())
        }
    }
}

/// Encode `y ∈ h_1 ∪ … ∪ h_r` for the complement half-spaces of an output
/// assertion.
///
/// A single half-space is emitted directly. Otherwise each `h_j` gets a
/// selector `d_j`, relaxed by `M_j (1 − d_j)` where `M_j` is the largest
/// amount by which `h_j` can fail over the output bounds, and
/// `Σ d_j ≥ 1`. Strict half-spaces are tightened by `tau_strict`.
pub fn encode_output_complement(
    p: &mut MipProblem,
    layer: usize,
    halfspaces: &[Halfspace],
    y_vars: &[VarId],
    y_bounds: &[Interval],
    tau_strict: f64,
) -> Result<Vec<VarId>> {
    if halfspaces.is_empty() {
        return Err(Error::VacuousAssertion);
    }
    if !(tau_strict > 0.0) {
        return Err(Error::Encoding(format!("tau_strict must be positive, got {tau_strict}")));
    }
    let terms_of = |h: &Halfspace| -> Vec<(VarId, f64)> { h.terms.iter().map(|(k, a)| (y_vars[*k], *a)).collect() };
    let rhs_of = |h: &Halfspace| if h.strict { h.rhs + tau_strict } else { h.rhs };
    for h in halfspaces {
        if let Some((k, _)) = h.terms.iter().find(|(k, _)| *k >= y_vars.len()) {
            return Err(Error::Dimension {
                context: "output half-space",
                expected: y_vars.len(),
                found: k + 1,
            });
        }
    }
    // a half-space with no terms is `0 ≥ rhs`: either everything or nothing
    let is_empty = |h: &Halfspace| h.terms.iter().all(|(_, a)| *a == 0.0);
    if halfspaces.iter().any(|h| is_empty(h) && 0.0 >= rhs_of(h)) {
        return Ok(Vec::new());
    }
    let live: Vec<&Halfspace> = halfspaces.iter().filter(|h| !is_empty(h)).collect();
    if live.is_empty() {
        return Err(Error::VacuousAssertion);
    }
    if live.len() == 1 {
        p.add_constraint("out_0", terms_of(live[0]), Relation::Ge, rhs_of(live[0]))?;
        return Ok(Vec::new());
    }
    let mut selectors = Vec::with_capacity(live.len());
    for (j, h) in live.into_iter().enumerate() {
        let d = p.add_binary(
            format!("d_{j}"),
            Some(Position {
                layer,
                unit: j,
                role: Role::OutputSelector,
            }),
        )?;
        let rhs = rhs_of(h);
        let act = interval_dot(h.terms.iter().map(|(k, a)| (*a, y_bounds[*k])), 0.0);
        let m = (rhs - act.lo).max(0.0);
        // terms·y ≥ rhs − M(1 − d)  ⇔  terms·y − M d ≥ rhs − M
        let mut terms = terms_of(h);
        terms.push((d, -m));
        p.add_constraint(format!("out_{j}"), terms, Relation::Ge, rhs - m)?;
        selectors.push(d);
    }
    p.add_constraint("outsel", selectors.iter().map(|d| (*d, 1.0)), Relation::Ge, 1.0)?;
    Ok(selectors)
}

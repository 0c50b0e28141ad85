//! Translation of a model and a property into a [`MipProblem`] whose
//! feasible points are the counterexamples to the property.

mod blocks;
mod bounds;

pub use blocks::{
    encode_batch_norm, encode_input_binarize, encode_input_set, encode_linear, encode_max,
    encode_output_complement, encode_relu, encode_sign,
};
pub use bounds::{compute_bounds, compute_bounds_with, input_hull, interval_dot, BoundsMap, Interval};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mip::{MipProblem, Position, Role, VarId};
use crate::model::{batch_norm, Block, Model};
use crate::property::{InputSet, Property};

/// Widest integer pre-image scanned when computing a batch-norm site gap.
const GAP_SCAN_LIMIT: f64 = 100_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncodingConfig {
    /// Margin used to realize strict complement half-spaces as `≥ b + τ`.
    pub tau_strict: f64,
    /// Propagate the input set's hull; otherwise sign outputs are `[-1, 1]`.
    pub tighten_bounds: bool,
    /// Replace indicators of neurons whose sign is fixed by their bounds.
    pub eliminate_stable: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            tau_strict: 1e-6,
            tighten_bounds: true,
            eliminate_stable: true,
        }
    }
}

/// A sign-like unit: `z = sign(pre − shift)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignSite {
    pub block: usize,
    pub unit: usize,
    pub pre: VarId,
    pub shift: f64,
    pub z: VarId,
    /// `None` when the unit was stable and eliminated.
    pub beta: Option<VarId>,
    /// Bounds on `pre − shift`.
    pub lower: f64,
    pub upper: f64,
    /// A `g > 0` such that restricting negative units to `pre − shift ≤ −g`
    /// loses no network behavior, when one is known.
    pub gap: Option<f64>,
}

/// The encoded problem and the metadata needed to interpret its solutions.
#[derive(Debug, Clone, Serialize)]
pub struct Encoding {
    pub problem: MipProblem,
    pub bounds: BoundsMap,
    pub sign_sites: Vec<SignSite>,
    /// Variables of each layer: inputs first, then one vector per block.
    pub layers: Vec<Vec<VarId>>,
    pub selectors: Vec<VarId>,
}

impl Encoding {
    pub fn input_vars(&self) -> &[VarId] {
        &self.layers[0]
    }

    pub fn output_vars(&self) -> &[VarId] {
        self.layers.last().expect("input layer present")
    }
}

fn role_of(block: &Block) -> Role {
    match block {
        Block::BinaryLinear { .. } | Block::RealLinear { .. } | Block::BatchNorm { .. } => Role::PreActivation,
        _ => Role::PostActivation,
    }
}

/// Whether every value of each layer is an integer, by construction.
fn integral_layers(m: &Model) -> Vec<bool> {
    let mut out = vec![false];
    for block in m.blocks() {
        let prev = *out.last().expect("seeded");
        let next = match block {
            Block::Sign { .. } | Block::InputBinarize { .. } => true,
            Block::BinaryLinear { bias, .. } => {
                prev && bias.as_ref().is_none_or(|b| b.iter().all(|v| v.fract() == 0.0))
            }
            Block::Relu { .. } | Block::Max { .. } => prev,
            Block::RealLinear { .. } | Block::BatchNorm { .. } => false,
        };
        out.push(next);
    }
    out
}

/// Gap for a sign unit whose pre-activation is `bn(y)` with integral `y`.
fn batch_norm_gap(y: Interval, alpha: f64, gamma: f64, mu: f64, sigma: f64) -> Option<f64> {
    if y.hi - y.lo > GAP_SCAN_LIMIT {
        return None;
    }
    let mut closest = f64::INFINITY;
    let mut k = y.lo.ceil();
    while k <= y.hi {
        let v = batch_norm(k, alpha, gamma, mu, sigma);
        if v < 0.0 {
            closest = closest.min(-v);
        }
        k += 1.0;
    }
    // no reachable negative value: any gap is valid
    Some(if closest.is_finite() { 0.5 * closest } else { 1.0 })
}

fn site_gap(m: &Model, s: &InputSet, bounds: &BoundsMap, integral: &[bool], block: usize, unit: usize) -> Option<f64> {
    match &m.blocks()[block] {
        Block::InputBinarize { threshold, .. } => match s {
            // coordinates are independent, so a negative unit can always be
            // moved halfway to its lower bound
            InputSet::Box { .. } | InputSet::InfBall { .. } => {
                let lo = bounds.input()[unit].lo;
                (lo < *threshold).then(|| 0.5 * (threshold - lo))
            }
            _ => None,
        },
        Block::Sign { .. } => {
            if integral[block] {
                return Some(1.0);
            }
            match block.checked_sub(1).map(|b| &m.blocks()[b]) {
                Some(Block::BatchNorm {
                    alpha,
                    gamma,
                    mu,
                    sigma,
                }) if integral[block - 1] => batch_norm_gap(
                    bounds.layer(block - 1)[unit],
                    alpha[unit],
                    gamma[unit],
                    mu[unit],
                    sigma[unit],
                ),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Encode `x ∈ input ∧ F(x) ∈ complement(output)`.
///
/// Fails with [`Error::VacuousAssertion`] when the output assertion admits
/// every output and with [`Error::EmptyInputSet`] when no input qualifies.
pub fn encode_network(m: &Model, prop: &Property, cfg: &EncodingConfig) -> Result<Encoding> {
    if !(cfg.tau_strict > 0.0) {
        return Err(Error::Encoding(format!("tau_strict must be positive, got {}", cfg.tau_strict)));
    }
    prop.check_dims(m.input_dim(), m.output_dim())?;
    let bounds = compute_bounds_with(m, &prop.input, cfg.tighten_bounds)?;
    let integral = integral_layers(m);
    let mut p = MipProblem::new();

    let mut layers: Vec<Vec<VarId>> = Vec::with_capacity(m.blocks().len() + 1);
    let inputs = bounds
        .input()
        .iter()
        .enumerate()
        .map(|(j, iv)| {
            p.add_continuous(
                format!("x_{j}"),
                iv.lo,
                iv.hi,
                Some(Position {
                    layer: 0,
                    unit: j,
                    role: Role::Input,
                }),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    encode_input_set(&mut p, &prop.input, &inputs)?;
    layers.push(inputs);

    let mut sign_sites = Vec::new();
    for (i, block) in m.blocks().iter().enumerate() {
        let layer = i + 1;
        let prev = layers[i].clone();
        let out_bounds = bounds.block_output(i);
        let role = role_of(block);
        let out = out_bounds
            .iter()
            .enumerate()
            .map(|(j, iv)| {
                let (lo, hi) = if block.is_sign_like() { (-1.0, 1.0) } else { (iv.lo, iv.hi) };
                p.add_continuous(format!("z{layer}_{j}"), lo, hi, Some(Position { layer, unit: j, role }))
            })
            .collect::<Result<Vec<_>>>()?;
        let pre_bounds = bounds.layer(i);
        match block {
            Block::BinaryLinear { weights, bias } => {
                let w: Vec<Vec<f64>> = weights.iter().map(|r| r.iter().map(|q| f64::from(*q)).collect()).collect();
                encode_linear(&mut p, layer, &w, bias.as_deref(), &prev, &out)?;
            }
            Block::RealLinear { weights, bias } => {
                encode_linear(&mut p, layer, weights, bias.as_deref(), &prev, &out)?;
            }
            Block::BatchNorm {
                alpha,
                gamma,
                mu,
                sigma,
            } => encode_batch_norm(&mut p, layer, &prev, &out, alpha, gamma, mu, sigma)?,
            Block::Sign { .. } => {
                for (j, (&pre, &z)) in prev.iter().zip(&out).enumerate() {
                    let iv = pre_bounds[j];
                    let beta = encode_sign(&mut p, layer, j, pre, z, iv.lo, iv.hi, cfg.eliminate_stable)?;
                    sign_sites.push(SignSite {
                        block: i,
                        unit: j,
                        pre,
                        shift: 0.0,
                        z,
                        beta,
                        lower: iv.lo,
                        upper: iv.hi,
                        gap: site_gap(m, &prop.input, &bounds, &integral, i, j),
                    });
                }
            }
            Block::InputBinarize { threshold, .. } => {
                for (j, (&x, &z)) in prev.iter().zip(&out).enumerate() {
                    let iv = pre_bounds[j];
                    let beta =
                        encode_input_binarize(&mut p, j, x, z, *threshold, iv.lo, iv.hi, cfg.eliminate_stable)?;
                    sign_sites.push(SignSite {
                        block: i,
                        unit: j,
                        pre: x,
                        shift: *threshold,
                        z,
                        beta,
                        lower: iv.lo - threshold,
                        upper: iv.hi - threshold,
                        gap: site_gap(m, &prop.input, &bounds, &integral, i, j),
                    });
                }
            }
            Block::Relu { .. } => {
                for (j, (&pre, &z)) in prev.iter().zip(&out).enumerate() {
                    let iv = pre_bounds[j];
                    encode_relu(&mut p, layer, j, pre, z, iv.lo, iv.hi, cfg.eliminate_stable)?;
                }
            }
            Block::Max { groups } => {
                for (j, g) in groups.iter().enumerate() {
                    let xs: Vec<VarId> = g.iter().map(|&k| prev[k]).collect();
                    let bs: Vec<Interval> = g.iter().map(|&k| pre_bounds[k]).collect();
                    encode_max(&mut p, layer, j, &xs, out[j], &bs)?;
                }
            }
        }
        layers.push(out);
    }

    let halfspaces = prop.output.complement(m.output_dim());
    let selectors = encode_output_complement(
        &mut p,
        layers.len(),
        &halfspaces,
        layers.last().expect("input layer present"),
        bounds.output(),
        cfg.tau_strict,
    )?;
    tracing::debug!(
        variables = p.variables().len(),
        constraints = p.constraints().len(),
        binaries = p.num_binaries(),
        "encoded network"
    );
    Ok(Encoding {
        problem: p,
        bounds,
        sign_sites,
        layers,
        selectors,
    })
}

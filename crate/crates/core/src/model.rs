//! Network representation, the JSON model document and the reference
//! forward evaluator.
//!
//! A [`Model`] is an ordered list of [`Block`]s. Fully binarized paths
//! (binary-linear layers fed by `{-1, +1}` activations with integer biases)
//! are evaluated in exact integer arithmetic; anything that passes through a
//! batch-norm or real-valued linear block is evaluated in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag required in every model and property document.
pub const FORMAT_VERSION: u64 = 1;

/// Largest magnitude for which integer-valued `f64` inputs are evaluated on
/// the exact integer path.
const EXACT_INT_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

/// One stage of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// `ẑ = Q z + b` with `Q` in `{-1, +1}`.
    BinaryLinear {
        weights: Vec<Vec<i8>>,
        bias: Option<Vec<f64>>,
    },
    /// `ẑ = W z + b` with real weights.
    RealLinear {
        weights: Vec<Vec<f64>>,
        bias: Option<Vec<f64>>,
    },
    /// Eval-time batch normalization `alpha * (y - mu) / sigma + gamma`.
    BatchNorm {
        alpha: Vec<f64>,
        gamma: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
    /// Elementwise sign with `sign(0) = +1`.
    Sign { width: usize },
    Relu { width: usize },
    /// One output per group, the maximum of the grouped inputs.
    Max { groups: Vec<Vec<usize>> },
    /// `+1` if `x >= threshold`, else `-1`. Only valid as the first block.
    InputBinarize { width: usize, threshold: f64 },
}

impl Block {
    pub fn kind(&self) -> &'static str {
        match self {
            Block::BinaryLinear { .. } => "binary_linear",
            Block::RealLinear { .. } => "real_linear",
            Block::BatchNorm { .. } => "batch_norm",
            Block::Sign { .. } => "sign",
            Block::Relu { .. } => "relu",
            Block::Max { .. } => "max",
            Block::InputBinarize { .. } => "input_binarize",
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Block::BinaryLinear { weights, .. } => weights.first().map_or(0, Vec::len),
            Block::RealLinear { weights, .. } => weights.first().map_or(0, Vec::len),
            Block::BatchNorm { alpha, .. } => alpha.len(),
            Block::Sign { width } | Block::Relu { width } => *width,
            Block::Max { groups } => groups.iter().map(Vec::len).sum(),
            Block::InputBinarize { width, .. } => *width,
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Block::BinaryLinear { weights, .. } => weights.len(),
            Block::RealLinear { weights, .. } => weights.len(),
            Block::Max { groups } => groups.len(),
            other => other.input_width(),
        }
    }

    /// True for blocks whose output is a piecewise-constant `{-1, +1}` code.
    pub fn is_sign_like(&self) -> bool {
        matches!(self, Block::Sign { .. } | Block::InputBinarize { .. })
    }
}

/// A validated feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    name: String,
    input_dim: usize,
    blocks: Vec<Block>,
}

fn block_err(block: usize, field: &'static str, message: &'static str) -> Error {
    Error::InvalidBlock {
        block,
        field,
        message,
        detail: String::new(),
    }
}

fn block_err_detail(block: usize, field: &'static str, message: &'static str, detail: String) -> Error {
    Error::InvalidBlock {
        block,
        field,
        message,
        detail: format!(": {detail}"),
    }
}

fn check_finite(block: usize, field: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(block_err_detail(block, field, "non-finite value", format!("entry {i}"))),
        None => Ok(()),
    }
}

fn check_len(block: usize, field: &'static str, len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(block_err_detail(
            block,
            field,
            "dimension mismatch",
            format!("expected {expected} entries, found {len}"),
        ));
    }
    Ok(())
}

fn check_matrix_shape<T>(block: usize, weights: &[Vec<T>], width: usize) -> Result<()> {
    if weights.is_empty() {
        return Err(block_err(block, "weights", "empty weight matrix"));
    }
    for (r, row) in weights.iter().enumerate() {
        if row.len() != width {
            return Err(block_err_detail(
                block,
                "weights",
                "dimension mismatch",
                format!("row {r} has {} columns, previous block produces {width}", row.len()),
            ));
        }
    }
    Ok(())
}

impl Model {
    /// Build a model, checking every structural invariant.
    pub fn new(name: impl Into<String>, input_dim: usize, blocks: Vec<Block>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidModel("input_dim must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidModel("model has no blocks".into()));
        }
        let mut width = input_dim;
        for (i, block) in blocks.iter().enumerate() {
            match block {
                Block::BinaryLinear { weights, bias } => {
                    check_matrix_shape(i, weights, width)?;
                    for (r, row) in weights.iter().enumerate() {
                        if let Some(c) = row.iter().position(|w| *w != 1 && *w != -1) {
                            return Err(block_err_detail(
                                i,
                                "weights",
                                "non-binary weight",
                                format!("found {} at row {r}, column {c}", row[c]),
                            ));
                        }
                    }
                    if let Some(b) = bias {
                        check_len(i, "bias", b.len(), weights.len())?;
                        check_finite(i, "bias", b)?;
                    }
                }
                Block::RealLinear { weights, bias } => {
                    check_matrix_shape(i, weights, width)?;
                    for row in weights {
                        check_finite(i, "weights", row)?;
                    }
                    if let Some(b) = bias {
                        check_len(i, "bias", b.len(), weights.len())?;
                        check_finite(i, "bias", b)?;
                    }
                }
                Block::BatchNorm {
                    alpha,
                    gamma,
                    mu,
                    sigma,
                } => {
                    for (field, v) in [("alpha", alpha), ("gamma", gamma), ("mu", mu), ("sigma", sigma)] {
                        check_len(i, field, v.len(), width)?;
                        check_finite(i, field, v)?;
                    }
                    if let Some(k) = sigma.iter().position(|s| *s <= 0.0) {
                        return Err(block_err_detail(
                            i,
                            "sigma",
                            "non-positive sigma",
                            format!("found {} at unit {k}", sigma[k]),
                        ));
                    }
                }
                Block::Sign { width: w } | Block::Relu { width: w } => {
                    check_len(i, "width", *w, width)?;
                }
                Block::Max { groups } => {
                    let mut seen = vec![false; width];
                    for g in groups {
                        if g.is_empty() {
                            return Err(block_err(i, "groups", "empty group"));
                        }
                        for &k in g {
                            if k >= width || seen[k] {
                                return Err(block_err_detail(
                                    i,
                                    "groups",
                                    "groups must partition the input indices",
                                    format!("index {k}"),
                                ));
                            }
                            seen[k] = true;
                        }
                    }
                    if seen.iter().any(|s| !s) {
                        return Err(block_err(i, "groups", "groups must partition the input indices"));
                    }
                }
                Block::InputBinarize { width: w, threshold } => {
                    if i != 0 {
                        return Err(block_err(i, "kind", "input_binarize must be the first block"));
                    }
                    check_len(i, "width", *w, width)?;
                    check_finite(i, "threshold", std::slice::from_ref(threshold))?;
                }
            }
            width = block.output_width();
        }
        Ok(Self {
            name: name.into(),
            input_dim,
            blocks,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.last().map_or(self.input_dim, Block::output_width)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// The threshold of the leading input-binarize block, if any.
    pub fn input_threshold(&self) -> Option<f64> {
        match self.blocks.first() {
            Some(Block::InputBinarize { threshold, .. }) => Some(*threshold),
            _ => None,
        }
    }

    /// True when every block is binary-linear with integral bias, sign or
    /// input-binarize, i.e. forward evaluation never leaves the integers.
    pub fn is_fully_binarized(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            Block::BinaryLinear { bias, .. } => bias
                .as_ref()
                .is_none_or(|b| b.iter().all(|v| v.fract() == 0.0)),
            Block::Sign { .. } | Block::InputBinarize { .. } => true,
            _ => false,
        })
    }

    /// Parse and validate a model document.
    pub fn load(bytes: &[u8]) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_slice(bytes)?;
        doc.into_model()
    }

    /// Serialize to the canonical document form (compact JSON, stable field
    /// order, shortest round-trip numbers, trailing newline).
    pub fn save(&self) -> String {
        let doc = ModelDoc::from_model(self);
        let mut s = serde_json::to_string(&doc).expect("model documents contain only finite numbers");
        s.push('\n');
        s
    }

    /// Evaluate the network, keeping integer-valued paths exact.
    pub fn evaluate(&self, x: &[f64]) -> Result<Values> {
        let mut v = self.start(x)?;
        for block in &self.blocks {
            v = apply_block(block, v);
        }
        Ok(v)
    }

    /// Logits for input `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x)?.into_f64())
    }

    /// Forward pass that records every block's input and output.
    pub fn forward_trace(&self, x: &[f64]) -> Result<ActivationTrace> {
        let mut v = self.start(x)?;
        let mut outputs = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            v = apply_block(block, v);
            outputs.push(v.to_f64());
        }
        Ok(ActivationTrace {
            input: x.to_vec(),
            outputs,
        })
    }

    fn start(&self, x: &[f64]) -> Result<Values> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "model input",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(Values::from_f64(x))
    }
}

/// A vector of activations, integer while the computation stays exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Int(Vec<i64>),
    Real(Vec<f64>),
}

impl Values {
    /// Integer representation when every entry is integral and small enough.
    pub fn from_f64(x: &[f64]) -> Self {
        if x.iter().all(|v| v.fract() == 0.0 && v.abs() <= EXACT_INT_LIMIT) {
            Values::Int(x.iter().map(|v| *v as i64).collect())
        } else {
            Values::Real(x.to_vec())
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Values::Int(_))
    }

    pub fn len(&self) -> usize {
        match self {
            Values::Int(v) => v.len(),
            Values::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Values::Int(v) => v.iter().map(|x| *x as f64).collect(),
            Values::Real(v) => v.clone(),
        }
    }

    pub fn into_f64(self) -> Vec<f64> {
        match self {
            Values::Int(v) => v.into_iter().map(|x| x as f64).collect(),
            Values::Real(v) => v,
        }
    }
}

/// `sign` as used by every sign-like block: `+1` when `x >= 0`.
#[inline]
pub fn sign(x: f64) -> i64 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Batch-norm affine map, shared by the forward pass and bound propagation
/// so both round identically.
#[inline]
pub(crate) fn batch_norm(y: f64, alpha: f64, gamma: f64, mu: f64, sigma: f64) -> f64 {
    alpha * ((y - mu) / sigma) + gamma
}

fn apply_block(block: &Block, v: Values) -> Values {
    match block {
        Block::BinaryLinear { weights, bias } => {
            let int_bias = bias.as_ref().is_none_or(|b| b.iter().all(|x| x.fract() == 0.0));
            match v {
                Values::Int(z) if int_bias => Values::Int(
                    weights
                        .iter()
                        .enumerate()
                        .map(|(j, row)| {
                            let dot: i64 = row.iter().zip(&z).map(|(q, x)| i64::from(*q) * x).sum();
                            dot + bias.as_ref().map_or(0, |b| b[j] as i64)
                        })
                        .collect(),
                ),
                other => {
                    let z = other.into_f64();
                    Values::Real(
                        weights
                            .iter()
                            .enumerate()
                            .map(|(j, row)| {
                                let mut acc = 0.0;
                                for (q, x) in row.iter().zip(&z) {
                                    acc += f64::from(*q) * x;
                                }
                                acc + bias.as_ref().map_or(0.0, |b| b[j])
                            })
                            .collect(),
                    )
                }
            }
        }
        Block::RealLinear { weights, bias } => {
            let z = v.into_f64();
            Values::Real(
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, row)| {
                        let mut acc = 0.0;
                        for (w, x) in row.iter().zip(&z) {
                            acc += w * x;
                        }
                        acc + bias.as_ref().map_or(0.0, |b| b[j])
                    })
                    .collect(),
            )
        }
        Block::BatchNorm {
            alpha,
            gamma,
            mu,
            sigma,
        } => {
            let y = v.into_f64();
            Values::Real(
                y.iter()
                    .enumerate()
                    .map(|(k, y)| batch_norm(*y, alpha[k], gamma[k], mu[k], sigma[k]))
                    .collect(),
            )
        }
        Block::Sign { .. } => match v {
            Values::Int(z) => Values::Int(z.into_iter().map(|x| if x >= 0 { 1 } else { -1 }).collect()),
            Values::Real(z) => Values::Int(z.into_iter().map(sign).collect()),
        },
        Block::Relu { .. } => match v {
            Values::Int(z) => Values::Int(z.into_iter().map(|x| x.max(0)).collect()),
            Values::Real(z) => Values::Real(z.into_iter().map(|x| if x > 0.0 { x } else { 0.0 }).collect()),
        },
        Block::Max { groups } => match v {
            Values::Int(z) => Values::Int(
                groups
                    .iter()
                    .map(|g| g.iter().map(|&k| z[k]).max().expect("groups are non-empty"))
                    .collect(),
            ),
            Values::Real(z) => Values::Real(
                groups
                    .iter()
                    .map(|g| g.iter().map(|&k| z[k]).fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
            ),
        },
        Block::InputBinarize { threshold, .. } => {
            let x = v.into_f64();
            Values::Int(x.into_iter().map(|x| sign(x - threshold)).collect())
        }
    }
}

/// Per-block activations recorded by [`Model::forward_trace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationTrace {
    pub input: Vec<f64>,
    /// `outputs[i]` is the output of block `i`.
    pub outputs: Vec<Vec<f64>>,
}

impl ActivationTrace {
    /// Input of block `i` (the pre-activation for sign/ReLU/max blocks).
    pub fn pre_activation(&self, block: usize) -> &[f64] {
        if block == 0 {
            &self.input
        } else {
            &self.outputs[block - 1]
        }
    }

    pub fn post_activation(&self, block: usize) -> &[f64] {
        &self.outputs[block]
    }

    pub fn output(&self) -> &[f64] {
        self.outputs.last().map_or(&self.input, Vec::as_slice)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: u64,
    name: String,
    input_dim: usize,
    blocks: Vec<BlockDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum BlockDoc {
    BinaryLinear {
        weights: Vec<Vec<serde_json::Number>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
    RealLinear {
        weights: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
    BatchNorm {
        alpha: Vec<f64>,
        gamma: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
    Sign,
    Relu,
    Max {
        groups: Vec<Vec<usize>>,
    },
    InputBinarize {
        threshold: f64,
    },
}

impl ModelDoc {
    fn into_model(self) -> Result<Model> {
        if self.format != FORMAT_VERSION {
            return Err(Error::Format {
                found: self.format,
                expected: FORMAT_VERSION,
            });
        }
        let mut width = self.input_dim;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, doc) in self.blocks.into_iter().enumerate() {
            let block = match doc {
                BlockDoc::BinaryLinear { weights, bias } => {
                    let mut rows = Vec::with_capacity(weights.len());
                    for (r, row) in weights.into_iter().enumerate() {
                        let mut out = Vec::with_capacity(row.len());
                        for (c, w) in row.into_iter().enumerate() {
                            match w.as_f64() {
                                Some(v) if v == 1.0 => out.push(1i8),
                                Some(v) if v == -1.0 => out.push(-1i8),
                                _ => {
                                    return Err(block_err_detail(
                                        i,
                                        "weights",
                                        "non-binary weight",
                                        format!("found {w} at row {r}, column {c}"),
                                    ))
                                }
                            }
                        }
                        rows.push(out);
                    }
                    Block::BinaryLinear { weights: rows, bias }
                }
                BlockDoc::RealLinear { weights, bias } => Block::RealLinear { weights, bias },
                BlockDoc::BatchNorm {
                    alpha,
                    gamma,
                    mu,
                    sigma,
                } => Block::BatchNorm {
                    alpha,
                    gamma,
                    mu,
                    sigma,
                },
                BlockDoc::Sign => Block::Sign { width },
                BlockDoc::Relu => Block::Relu { width },
                BlockDoc::Max { groups } => Block::Max { groups },
                BlockDoc::InputBinarize { threshold } => Block::InputBinarize { width, threshold },
            };
            width = block.output_width();
            blocks.push(block);
        }
        Model::new(self.name, self.input_dim, blocks)
    }

    fn from_model(m: &Model) -> Self {
        let blocks = m
            .blocks
            .iter()
            .map(|b| match b {
                Block::BinaryLinear { weights, bias } => BlockDoc::BinaryLinear {
                    weights: weights
                        .iter()
                        .map(|row| row.iter().map(|w| serde_json::Number::from(*w)).collect())
                        .collect(),
                    bias: bias.clone(),
                },
                Block::RealLinear { weights, bias } => BlockDoc::RealLinear {
                    weights: weights.clone(),
                    bias: bias.clone(),
                },
                Block::BatchNorm {
                    alpha,
                    gamma,
                    mu,
                    sigma,
                } => BlockDoc::BatchNorm {
                    alpha: alpha.clone(),
                    gamma: gamma.clone(),
                    mu: mu.clone(),
                    sigma: sigma.clone(),
                },
                Block::Sign { .. } => BlockDoc::Sign,
                Block::Relu { .. } => BlockDoc::Relu,
                Block::Max { groups } => BlockDoc::Max { groups: groups.clone() },
                Block::InputBinarize { threshold, .. } => BlockDoc::InputBinarize { threshold: *threshold },
            })
            .collect();
        ModelDoc {
            format: FORMAT_VERSION,
            name: m.name.clone(),
            input_dim: m.input_dim,
            blocks,
        }
    }
}

//! Input sets, output assertions and their linear descriptions.
//!
//! A [`Property`] states `x ∈ input ⟹ F(x) ∈ output`. Verification searches
//! the complement of the output set, which [`OutputAssertion::complement`]
//! returns as a disjunction of half-spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FORMAT_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRelation {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRelation {
    Le,
    Lt,
}

/// `coeffs · x (relation) rhs` over the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRow {
    pub coeffs: Vec<f64>,
    pub relation: InputRelation,
    pub rhs: f64,
}

/// `coeffs · y (relation) rhs` over the network output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub coeffs: Vec<f64>,
    pub relation: OutputRelation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "inf")]
    LInf,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "l1" => Ok(Norm::L1),
            "inf" | "linf" | "∞" => Ok(Norm::LInf),
            other => Err(Error::InvalidProperty(format!("unsupported norm `{other}`"))),
        }
    }
}

/// The set 𝒳 of inputs a property quantifies over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Closed ℓ∞ ball.
    InfBall { center: Vec<f64>, radius: f64 },
    /// Closed ℓ1 ball.
    OneBall { center: Vec<f64>, radius: f64 },
    Polytope { dim: usize, rows: Vec<InputRow> },
}

impl InputSet {
    pub fn dim(&self) -> usize {
        match self {
            InputSet::Box { lower, .. } => lower.len(),
            InputSet::InfBall { center, .. } | InputSet::OneBall { center, .. } => center.len(),
            InputSet::Polytope { dim, .. } => *dim,
        }
    }

    /// The single point `x0`.
    pub fn point(x0: Vec<f64>) -> Self {
        InputSet::InfBall {
            center: x0,
            radius: 0.0,
        }
    }

    /// Inputs within Hamming distance `radius` of a `{-1, +1}` vector, for
    /// models that start with an input-binarize block at threshold 0.
    ///
    /// Realized as the ℓ1 ball of radius `radius + 0.5`: flipping a `-1` to
    /// `+1` costs exactly 1 and flipping a `+1` below zero costs just over 1,
    /// so `radius` flips fit and `radius + 1` do not.
    pub fn hamming_ball(center: Vec<f64>, radius: usize) -> Result<Self> {
        if center.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(Error::InvalidProperty("hamming ball center must be in {-1, +1}".into()));
        }
        Ok(InputSet::OneBall {
            center,
            radius: radius as f64 + 0.5,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::Dimension {
                        context: "box bounds",
                        expected: lower.len(),
                        found: upper.len(),
                    });
                }
                for (l, u) in lower.iter().zip(upper) {
                    if l.is_nan() || u.is_nan() || l > u {
                        return Err(Error::InvalidBounds { lower: *l, upper: *u });
                    }
                }
            }
            InputSet::InfBall { center, radius } | InputSet::OneBall { center, radius } => {
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidProperty(format!("radius must be non-negative, got {radius}")));
                }
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidProperty("ball center must be finite".into()));
                }
            }
            InputSet::Polytope { dim, rows } => {
                for row in rows {
                    if row.coeffs.len() != *dim {
                        return Err(Error::Dimension {
                            context: "input polytope row",
                            expected: *dim,
                            found: row.coeffs.len(),
                        });
                    }
                }
            }
        }
        if self.dim() == 0 {
            return Err(Error::InvalidProperty("input set has dimension 0".into()));
        }
        Ok(())
    }

    /// Exact membership test.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                context: "input membership",
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self {
            InputSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            InputSet::InfBall { center, radius } => {
                x.iter().zip(center).all(|(v, c)| (v - c).abs() <= *radius)
            }
            InputSet::OneBall { center, radius } => l1_distance(x, center) <= *radius,
            InputSet::Polytope { rows, .. } => rows.iter().all(|r| {
                let a = dot(&r.coeffs, x);
                match r.relation {
                    InputRelation::Le => a <= r.rhs,
                    InputRelation::Eq => a == r.rhs,
                }
            }),
        })
    }

    /// Per-coordinate interval hull for the set kinds that have a closed
    /// form. Polytopes return `None`.
    pub fn box_hull(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            InputSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            InputSet::InfBall { center, radius } | InputSet::OneBall { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            InputSet::Polytope { .. } => None,
        }
    }

    /// The unique member when the set is a single point.
    pub fn as_point(&self) -> Option<Vec<f64>> {
        match self {
            InputSet::InfBall { center, radius } | InputSet::OneBall { center, radius } if *radius == 0.0 => {
                Some(center.clone())
            }
            InputSet::Box { lower, upper } if lower == upper => Some(lower.clone()),
            _ => None,
        }
    }
}

pub fn l1_distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).abs()).sum()
}

/// Dot product over the non-zero coefficients, in index order. Every
/// membership test in this module goes through here so that a set and its
/// complement always round identically.
fn dot(coeffs: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, v) in coeffs.iter().zip(y) {
        if *a != 0.0 {
            acc += a * v;
        }
    }
    acc
}

/// `terms · y ≥ rhs`, or `> rhs` when `strict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub strict: bool,
}

impl Halfspace {
    pub fn contains(&self, y: &[f64]) -> bool {
        let mut acc = 0.0;
        for &(k, a) in &self.terms {
            acc += a * y[k];
        }
        if self.strict {
            acc > self.rhs
        } else {
            acc >= self.rhs
        }
    }
}

/// The output set 𝒴 a property asserts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputAssertion {
    /// `y[target] > y[j] + margin` for every `j != target`.
    LabelDominance {
        target: usize,
        #[serde(default)]
        margin: f64,
    },
    Polytope { rows: Vec<OutputRow> },
}

impl OutputAssertion {
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        match self {
            OutputAssertion::LabelDominance { target, margin } => {
                if *target >= output_dim {
                    return Err(Error::InvalidProperty(format!(
                        "label {target} out of range for {output_dim} outputs"
                    )));
                }
                if !margin.is_finite() {
                    return Err(Error::InvalidProperty("margin must be finite".into()));
                }
            }
            OutputAssertion::Polytope { rows } => {
                for row in rows {
                    if row.coeffs.len() != output_dim {
                        return Err(Error::Dimension {
                            context: "output polytope row",
                            expected: output_dim,
                            found: row.coeffs.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact membership test; label dominance is strict.
    pub fn satisfied_by(&self, y: &[f64]) -> Result<bool> {
        match self {
            OutputAssertion::LabelDominance { target, margin } => {
                if *target >= y.len() {
                    return Err(Error::Dimension {
                        context: "output membership",
                        expected: target + 1,
                        found: y.len(),
                    });
                }
                // y[t] - y[j] is the exact negation of the complement's y[j] - y[t]
                Ok((0..y.len())
                    .filter(|&j| j != *target)
                    .all(|j| y[*target] - y[j] > *margin))
            }
            OutputAssertion::Polytope { rows } => {
                for row in rows {
                    if row.coeffs.len() != y.len() {
                        return Err(Error::Dimension {
                            context: "output membership",
                            expected: row.coeffs.len(),
                            found: y.len(),
                        });
                    }
                }
                Ok(rows.iter().all(|r| {
                    let a = dot(&r.coeffs, y);
                    match r.relation {
                        OutputRelation::Le => a <= r.rhs,
                        OutputRelation::Lt => a < r.rhs,
                    }
                }))
            }
        }
    }

    /// Half-spaces whose union is exactly the complement of this set.
    pub fn complement(&self, output_dim: usize) -> Vec<Halfspace> {
        match self {
            OutputAssertion::LabelDominance { target, margin } => (0..output_dim)
                .filter(|j| j != target)
                .map(|j| {
                    let mut terms = vec![(j, 1.0), (*target, -1.0)];
                    terms.sort_by_key(|t| t.0);
                    Halfspace {
                        terms,
                        rhs: -margin,
                        strict: false,
                    }
                })
                .collect(),
            OutputAssertion::Polytope { rows } => rows
                .iter()
                .map(|r| Halfspace {
                    terms: r
                        .coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| **a != 0.0)
                        .map(|(k, a)| (k, *a))
                        .collect(),
                    rhs: r.rhs,
                    strict: r.relation == OutputRelation::Le,
                })
                .collect(),
        }
    }
}

/// `x ∈ input ⟹ F(x) ∈ output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    pub input: InputSet,
    pub output: OutputAssertion,
}

#[derive(Serialize, Deserialize)]
struct PropertyDoc {
    format: u64,
    #[serde(flatten)]
    property: Property,
}

impl Property {
    pub fn new(name: impl Into<String>, input: InputSet, output: OutputAssertion) -> Result<Self> {
        input.validate()?;
        Ok(Self {
            name: name.into(),
            input,
            output,
        })
    }

    /// Check dimensions against a model's input and output widths.
    pub fn check_dims(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        if self.input.dim() != input_dim {
            return Err(Error::Dimension {
                context: "property input set",
                expected: input_dim,
                found: self.input.dim(),
            });
        }
        self.output.validate(output_dim)
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let doc: PropertyDoc = serde_json::from_slice(bytes)?;
        if doc.format != FORMAT_VERSION {
            return Err(Error::Format {
                found: doc.format,
                expected: FORMAT_VERSION,
            });
        }
        doc.property.input.validate()?;
        Ok(doc.property)
    }

    pub fn save(&self) -> String {
        let doc = PropertyDoc {
            format: FORMAT_VERSION,
            property: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("property documents contain only finite numbers");
        s.push('\n');
        s
    }
}

/// Local robustness around `x0`: every input within `eps` (in `norm`) of
/// `x0` must keep `label` strictly dominant.
pub fn robustness_property(x0: &[f64], label: usize, num_outputs: usize, eps: f64, norm: Norm) -> Result<Property> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidProperty(format!("epsilon must be non-negative, got {eps}")));
    }
    if label >= num_outputs {
        return Err(Error::InvalidProperty(format!(
            "label {label} out of range for {num_outputs} outputs"
        )));
    }
    let center = x0.to_vec();
    let input = match norm {
        Norm::LInf => InputSet::InfBall { center, radius: eps },
        Norm::L1 => InputSet::OneBall { center, radius: eps },
    };
    Property::new(
        format!("robust_label{label}_eps{eps}"),
        input,
        OutputAssertion::LabelDominance {
            target: label,
            margin: 0.0,
        },
    )
}

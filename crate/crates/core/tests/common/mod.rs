//! Random small networks and properties shared by the integration tests.
#![allow(dead_code)]

pub mod blocks;

use bnnverify::model::{Block, Model};
use bnnverify::property::{InputSet, OutputAssertion, OutputRelation, OutputRow, Property};
use rand::Rng;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{FIXTURES}/{name}")).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn pm1(rng: &mut impl Rng) -> i8 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

fn binary_linear(rng: &mut impl Rng, rows: usize, cols: usize) -> Block {
    Block::BinaryLinear {
        weights: (0..rows).map(|_| (0..cols).map(|_| pm1(rng)).collect()).collect(),
        bias: Some((0..rows).map(|_| f64::from(rng.gen_range(-2i32..=2))).collect()),
    }
}

fn batch_norm(rng: &mut impl Rng, width: usize) -> Block {
    Block::BatchNorm {
        alpha: (0..width)
            .map(|_| rng.gen_range(0.2..2.0) * if rng.gen_bool(0.8) { 1.0 } else { -1.0 })
            .collect(),
        gamma: (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        mu: (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        sigma: (0..width).map(|_| rng.gen_range(0.5..2.0)).collect(),
    }
}

/// A fully binarized network: input binarization at 0, then one or two
/// hidden binary layers (some followed by batch norm) and a binary output
/// layer.
pub fn random_bnn(rng: &mut impl Rng) -> Model {
    let hidden = rng.gen_range(1..=2);
    random_bnn_with(rng, hidden)
}

/// Like [`random_bnn`] with a fixed number of hidden layers.
pub fn random_bnn_with(rng: &mut impl Rng, hidden: usize) -> Model {
    let n = rng.gen_range(2..=8);
    let mut blocks = vec![Block::InputBinarize { width: n, threshold: 0.0 }];
    let mut width = n;
    for _ in 0..hidden {
        let w = rng.gen_range(2..=6);
        blocks.push(binary_linear(rng, w, width));
        if rng.gen_bool(0.5) {
            blocks.push(batch_norm(rng, w));
        }
        blocks.push(Block::Sign { width: w });
        width = w;
    }
    let outputs = rng.gen_range(2..=4);
    blocks.push(binary_linear(rng, outputs, width));
    Model::new("random_bnn", n, blocks).expect("generated model is valid")
}

/// A partially binarized network: a binary front end followed by a
/// real-valued ReLU layer and optionally a max-pooling block.
pub fn random_mixed(rng: &mut impl Rng) -> Model {
    let n = rng.gen_range(2..=8);
    let h = rng.gen_range(2..=6);
    let r = rng.gen_range(2..=6);
    let mut blocks = vec![
        Block::InputBinarize { width: n, threshold: 0.0 },
        binary_linear(rng, h, n),
        batch_norm(rng, h),
        Block::Sign { width: h },
        Block::RealLinear {
            weights: (0..r).map(|_| (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            bias: Some((0..r).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        },
        Block::Relu { width: r },
    ];
    let mut width = r;
    if rng.gen_bool(0.5) && r >= 3 {
        // a pair, a singleton and the rest
        let mut groups = vec![vec![0, 1], vec![2]];
        if r > 3 {
            groups.push((3..r).collect());
        }
        width = groups.len();
        blocks.push(Block::Max { groups });
    }
    let outputs = rng.gen_range(2..=4);
    blocks.push(Block::RealLinear {
        weights: (0..outputs)
            .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        bias: Some((0..outputs).map(|_| rng.gen_range(-0.5..0.5)).collect()),
    });
    Model::new("random_mixed", n, blocks).expect("generated model is valid")
}

/// A Hamming ball of radius 1 or 2 around a random `{-1, +1}` center with
/// either a label-dominance or a random polytope assertion.
pub fn random_property(rng: &mut impl Rng, m: &Model) -> Property {
    let center: Vec<f64> = (0..m.input_dim()).map(|_| f64::from(pm1(rng))).collect();
    let radius = rng.gen_range(1..=2);
    let input = InputSet::hamming_ball(center.clone(), radius).expect("valid center");
    let k = m.output_dim();
    let output = if rng.gen_bool(0.7) {
        // usually the label the network gives the center, so both verdicts occur
        let y = m.forward(&center).expect("valid input");
        let best = (0..k).fold(0, |b, i| if y[i] > y[b] { i } else { b });
        let target = if rng.gen_bool(0.8) { best } else { rng.gen_range(0..k) };
        OutputAssertion::LabelDominance { target, margin: 0.0 }
    } else {
        OutputAssertion::Polytope {
            rows: (0..rng.gen_range(1..=2))
                .map(|_| OutputRow {
                    coeffs: (0..k).map(|_| f64::from(rng.gen_range(-1i32..=1))).collect(),
                    relation: if rng.gen_bool(0.5) { OutputRelation::Le } else { OutputRelation::Lt },
                    rhs: f64::from(rng.gen_range(0i32..=3)),
                })
                .collect(),
        }
    };
    Property::new("random", input, output).expect("valid property")
}

/// Local robustness over a Hamming ball of radius 1 or 2: the label the
/// network gives the center must stay strictly dominant.
pub fn hamming_robustness(rng: &mut impl Rng, m: &Model) -> Property {
    let center: Vec<f64> = (0..m.input_dim()).map(|_| f64::from(pm1(rng))).collect();
    let y = m.forward(&center).expect("valid input");
    let label = (0..y.len()).fold(0, |b, i| if y[i] > y[b] { i } else { b });
    let radius = rng.gen_range(1..=2);
    Property::new(
        format!("hamming{radius}_label{label}"),
        InputSet::hamming_ball(center, radius).expect("valid center"),
        OutputAssertion::LabelDominance { target: label, margin: 0.0 },
    )
    .expect("valid property")
}

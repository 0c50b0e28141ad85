//! A network mixing a binarized front end with real-valued ReLU and
//! max-pooling blocks, checked against a polytope assertion over a box of
//! inputs.
//!
//! ```text
//! cargo run --example partially_binarized
//! ```

use bnnverify::model::{Block, Model};
use bnnverify::property::{InputSet, OutputAssertion, OutputRelation, OutputRow, Property};
use bnnverify::solver::{verify, Verdict, VerifyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::new(
        "mixed",
        3,
        vec![
            Block::InputBinarize { width: 3, threshold: 0.5 },
            Block::BinaryLinear {
                weights: vec![vec![1, 1, -1], vec![-1, 1, 1], vec![1, -1, 1], vec![1, 1, 1]],
                bias: None,
            },
            Block::BatchNorm {
                alpha: vec![1.0, 0.5, -1.0, 2.0],
                gamma: vec![0.1, 0.0, 0.2, -0.3],
                mu: vec![0.0, 1.0, -1.0, 0.5],
                sigma: vec![1.0, 2.0, 1.0, 1.5],
            },
            Block::Relu { width: 4 },
            Block::Max {
                groups: vec![vec![0, 1], vec![2, 3]],
            },
            Block::RealLinear {
                weights: vec![vec![1.0, -0.5], vec![-0.25, 1.0]],
                bias: Some(vec![0.0, 0.1]),
            },
        ],
    )?;
    let input = InputSet::Box {
        lower: vec![0.0, 0.0, 0.0],
        upper: vec![1.0, 1.0, 1.0],
    };
    for bound in [1.0, 3.0] {
        // y0 + y1 < bound for every input in the box
        let prop = Property::new(
            format!("sum_below_{bound}"),
            input.clone(),
            OutputAssertion::Polytope {
                rows: vec![OutputRow {
                    coeffs: vec![1.0, 1.0],
                    relation: OutputRelation::Lt,
                    rhs: bound,
                }],
            },
        )?;
        let report = verify(&model, &prop, &VerifyConfig::default())?;
        print!("{}: {}", prop.name, report.verdict.label());
        if let Verdict::CounterexampleFound(c) = &report.verdict {
            print!(" at x = {:?}, y = {:?}", c.input, c.output);
        }
        println!();
    }
    Ok(())
}

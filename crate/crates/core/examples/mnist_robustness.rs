//! Check ℓ∞ robustness of the bundled MNIST network on the first few test
//! images.
//!
//! ```text
//! cargo run --release --example mnist_robustness -- [count] [epsilon]
//! ```

use std::time::{Duration, Instant};

use bnnverify::model::Model;
use bnnverify::property::{robustness_property, Norm};
use bnnverify::solver::{verify, VerifyConfig};

const MODEL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/mnist_bnn.json");
const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/mnist_test.jsonl");

#[derive(serde::Deserialize)]
struct Row {
    input: Vec<f64>,
    label: usize,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let eps: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);

    let model = Model::load(&std::fs::read(MODEL)?)?;
    let mut cfg = VerifyConfig::default();
    cfg.solver.timeout = Duration::from_secs(120);

    for (i, line) in std::fs::read_to_string(DATA)?.lines().take(count).enumerate() {
        let row: Row = serde_json::from_str(line)?;
        let prop = robustness_property(&row.input, row.label, model.output_dim(), eps, Norm::LInf)?;
        let start = Instant::now();
        let report = verify(&model, &prop, &cfg)?;
        println!(
            "{i:3} label {} {:14} {:8.3}s nodes {}",
            row.label,
            report.verdict.label(),
            start.elapsed().as_secs_f64(),
            report.stats.nodes
        );
    }
    Ok(())
}

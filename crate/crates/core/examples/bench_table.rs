//! The robustness benchmark report on the first images of the MNIST
//! fixture, as a text table and as JSON lines.
//!
//! ```text
//! cargo run --release --example bench_table -- [count] [epsilon]
//! ```

use bnnverify::bench::{load_dataset, run_bench, BenchConfig, MisclassifiedMode};
use bnnverify::model::Model;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let eps: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.05);

    let model = Model::load(&std::fs::read(format!("{FIXTURES}/mnist_bnn.json"))?)?;
    let data = load_dataset(&std::fs::read_to_string(format!("{FIXTURES}/mnist_test.jsonl"))?)?;
    let cfg = BenchConfig {
        epsilon: eps,
        count: Some(count),
        misclassified: MisclassifiedMode::Skip,
        ..BenchConfig::default()
    };
    let report = run_bench(&model, &data, &cfg)?;
    print!("{}", report.to_text());
    println!();
    print!("{}", report.to_jsonl());
    Ok(())
}

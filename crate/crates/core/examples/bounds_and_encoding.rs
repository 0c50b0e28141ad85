//! Interval bounds and what the encoder makes of them, on one MNIST image.
//!
//! Tighter bounds leave more sign units stable, and stable units need no
//! binary variable.
//!
//! ```text
//! cargo run --release --example bounds_and_encoding -- [image] [epsilon]
//! ```

use bnnverify::bench::load_dataset;
use bnnverify::encoder::{compute_bounds_with, encode_network, EncodingConfig};
use bnnverify::model::Model;
use bnnverify::property::{robustness_property, Norm};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let image: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let eps: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);

    let model = Model::load(&std::fs::read(format!("{FIXTURES}/mnist_bnn.json"))?)?;
    let data = load_dataset(&std::fs::read_to_string(format!("{FIXTURES}/mnist_test.jsonl"))?)?;
    let row = &data[image];
    let prop = robustness_property(&row.input, row.label, model.output_dim(), eps, Norm::LInf)?;

    let bounds = compute_bounds_with(&model, &prop.input, true)?;
    for (i, block) in model.blocks().iter().enumerate() {
        let Some(pre) = bounds.sign_pre_activation(&model, i) else { continue };
        let unstable = pre.iter().filter(|iv| iv.lo < 0.0 && iv.hi >= 0.0).count();
        println!("block {i} ({}): {unstable} of {} units straddle zero", block.kind(), pre.len());
    }
    let out = bounds.output();
    println!("logit intervals:");
    for (k, iv) in out.iter().enumerate() {
        println!("  {k}: [{:.3}, {:.3}]", iv.lo, iv.hi);
    }

    for (label, cfg) in [
        ("tightened, stable units eliminated", EncodingConfig::default()),
        (
            "untightened, every unit encoded",
            EncodingConfig {
                tighten_bounds: false,
                eliminate_stable: false,
                ..EncodingConfig::default()
            },
        ),
    ] {
        let enc = encode_network(&model, &prop, &cfg)?;
        println!(
            "{label}: {} variables, {} binary, {} constraints",
            enc.problem.variables().len(),
            enc.problem.num_binaries(),
            enc.problem.constraints().len()
        );
    }
    Ok(())
}

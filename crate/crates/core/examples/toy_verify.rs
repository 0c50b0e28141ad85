//! Prove one property of a 2-2-2 binarized network and refute another.
//!
//! ```text
//! cargo run --example toy_verify
//! ```

use bnnverify::model::Model;
use bnnverify::property::Property;
use bnnverify::solver::{verify, Verdict, VerifyConfig};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Model::load(&std::fs::read(format!("{FIXTURES}/toy_222.json"))?)?;
    for name in ["toy_holds.json", "toy_cex.json"] {
        let prop = Property::load(&std::fs::read(format!("{FIXTURES}/{name}"))?)?;
        let report = verify(&model, &prop, &VerifyConfig::default())?;
        println!("{}: {} after {} nodes", prop.name, report.verdict.label(), report.stats.nodes);
        if let Verdict::CounterexampleFound(c) = &report.verdict {
            println!("  input  {:?}", c.input);
            for (i, block) in model.blocks().iter().enumerate() {
                println!("  {:<14} {:?}", block.kind(), c.trace.post_activation(i));
            }
        }
    }
    Ok(())
}

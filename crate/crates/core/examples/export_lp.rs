//! Encode a property and print it in CPLEX LP format, ready for an external
//! MIP solver.
//!
//! ```text
//! cargo run --example export_lp -- [model.json property.json]
//! ```

use bnnverify::encoder::{encode_network, EncodingConfig};
use bnnverify::mip::export_lp;
use bnnverify::model::Model;
use bnnverify::property::Property;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (model, prop) = match args.as_slice() {
        [m, p] => (m.clone(), p.clone()),
        _ => (format!("{FIXTURES}/toy_222.json"), format!("{FIXTURES}/toy_cex.json")),
    };
    let model = Model::load(&std::fs::read(model)?)?;
    let prop = Property::load(&std::fs::read(prop)?)?;
    let enc = encode_network(&model, &prop, &EncodingConfig::default())?;
    print!("{}", export_lp(&enc.problem));
    Ok(())
}

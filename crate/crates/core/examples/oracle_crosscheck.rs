//! Compare the MIP verifier with exhaustive enumeration on random small
//! binarized networks.
//!
//! ```text
//! cargo run --example oracle_crosscheck -- [count] [seed]
//! ```

use bnnverify::model::{Block, Model};
use bnnverify::oracle::{brute_force_verify, enumerate_inputs};
use bnnverify::property::{InputSet, OutputAssertion, Property};
use bnnverify::solver::{verify, VerifyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pm1(rng: &mut impl Rng) -> i8 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

fn random_net(rng: &mut impl Rng) -> Result<Model, bnnverify::Error> {
    let n = rng.gen_range(3..=8);
    let widths = [n, rng.gen_range(2..=6), rng.gen_range(2..=6), rng.gen_range(2..=4)];
    let mut blocks = vec![Block::InputBinarize { width: n, threshold: 0.0 }];
    for (k, w) in widths.windows(2).enumerate() {
        blocks.push(Block::BinaryLinear {
            weights: (0..w[1]).map(|_| (0..w[0]).map(|_| pm1(rng)).collect()).collect(),
            bias: Some((0..w[1]).map(|_| f64::from(rng.gen_range(-1i32..=1))).collect()),
        });
        if k + 2 < widths.len() {
            blocks.push(Block::Sign { width: w[1] });
        }
    }
    Model::new("random", n, blocks)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut agree = 0;
    for i in 0..count {
        let m = random_net(&mut rng)?;
        let center: Vec<f64> = (0..m.input_dim()).map(|_| f64::from(pm1(&mut rng))).collect();
        let y = m.forward(&center)?;
        let label = (0..y.len()).fold(0, |b, k| if y[k] > y[b] { k } else { b });
        let input = InputSet::hamming_ball(center, rng.gen_range(1..=2))?;
        let inputs = enumerate_inputs(&m, &input)?.len();
        let prop = Property::new("robust", input, OutputAssertion::LabelDominance { target: label, margin: 0.0 })?;
        let expected = brute_force_verify(&m, &prop)?;
        let got = verify(&m, &prop, &VerifyConfig::default())?.verdict;
        let same = expected.label() == got.label();
        agree += usize::from(same);
        println!(
            "{i:3}: {inputs:3} inputs enumerated, oracle {:<14} solver {:<14}{}",
            expected.label(),
            got.label(),
            if same { "" } else { "  MISMATCH" }
        );
    }
    println!("{agree}/{count} agree");
    Ok(())
}

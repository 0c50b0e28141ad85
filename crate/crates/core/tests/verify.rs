//! End-to-end verification checked against exhaustive enumeration.

mod common;

use bnnverify::encoder::EncodingConfig;
use bnnverify::model::Model;
use bnnverify::oracle::brute_force_verify;
use bnnverify::property::Property;
use bnnverify::solver::{verify, Verdict, VerifyConfig};
use common::{fixture, random_bnn, random_mixed, random_property};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy() -> Model {
    Model::load(&fixture("toy_222.json")).unwrap()
}

#[test]
fn toy_property_holds() {
    let prop = Property::load(&fixture("toy_holds.json")).unwrap();
    let report = verify(&toy(), &prop, &VerifyConfig::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Holds);
    assert_eq!(report.trivial, None);
}

#[test]
fn toy_counterexample_is_genuine() {
    let m = toy();
    let prop = Property::load(&fixture("toy_cex.json")).unwrap();
    let Verdict::CounterexampleFound(c) = verify(&m, &prop, &VerifyConfig::default()).unwrap().verdict else {
        panic!("expected a counterexample")
    };
    assert!(prop.input.contains(&c.input).unwrap());
    // the only violating sign pattern is (-1, +1), with outputs (0, 3)
    assert!(c.input[0] < 0.0 && c.input[1] >= 0.0);
    assert_eq!(c.output, vec![0.0, 3.0]);
    assert_eq!(m.forward(&c.input).unwrap(), c.output);
}

fn agree(m: &Model, prop: &Property, cfg: &VerifyConfig) -> (bool, String) {
    let expected = brute_force_verify(m, prop).unwrap();
    let got = verify(m, prop, cfg).unwrap().verdict;
    if let Verdict::CounterexampleFound(c) = &got {
        assert!(prop.input.contains(&c.input).unwrap(), "counterexample outside the input set");
        assert_eq!(&m.forward(&c.input).unwrap(), &c.output);
        assert!(!prop.output.satisfied_by(&c.output).unwrap(), "counterexample satisfies the assertion");
    }
    let same = matches!(
        (&expected, &got),
        (Verdict::Holds, Verdict::Holds) | (Verdict::CounterexampleFound(_), Verdict::CounterexampleFound(_))
    );
    (same, format!("oracle {} solver {}", expected.label(), got.label()))
}

#[test]
fn random_bnns_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut holds = 0;
    for i in 0..60 {
        let m = random_bnn(&mut rng);
        let prop = random_property(&mut rng, &m);
        let (same, msg) = agree(&m, &prop, &VerifyConfig::default());
        assert!(same, "case {i}: {msg}\n{}\n{}", m.save(), prop.save());
        holds += usize::from(msg.starts_with("oracle HOLDS"));
    }
    assert!(holds > 5 && holds < 55, "{holds} of 60 hold");
}

#[test]
fn random_mixed_networks_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..40 {
        let m = random_mixed(&mut rng);
        let prop = random_property(&mut rng, &m);
        let (same, msg) = agree(&m, &prop, &VerifyConfig::default());
        assert!(same, "case {i}: {msg}\n{}\n{}", m.save(), prop.save());
    }
}

#[test]
fn configuration_does_not_change_verdicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..30 {
        let m = if i % 2 == 0 { random_bnn(&mut rng) } else { random_mixed(&mut rng) };
        let prop = random_property(&mut rng, &m);
        let mut cfg = VerifyConfig {
            encoding: EncodingConfig {
                tighten_bounds: false,
                eliminate_stable: false,
                ..EncodingConfig::default()
            },
            ..VerifyConfig::default()
        };
        cfg.solver.workers = 2;
        cfg.solver.branch_rule = bnnverify::solver::BranchRule::MostFractionalBoundImpact;
        let (same, msg) = agree(&m, &prop, &cfg);
        assert!(same, "case {i}: {msg}");
    }
}

//! Encoder semantics checked against the reference forward pass.

mod common;

use bnnverify::encoder::{compute_bounds, encode_network, EncodingConfig, Interval};
use bnnverify::mip::{check_assignment, Assignment, Role};
use bnnverify::model::Block;
use bnnverify::property::{InputSet, OutputAssertion, Property};
use common::blocks::check_exact;
use common::{random_bnn, random_mixed, random_property};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn grid(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    (0..=steps).map(move |k| lo + (hi - lo) * k as f64 / steps as f64)
}

#[test]
fn sign_is_exact_off_the_boundary() {
    let r = [Interval::new(-2.0, 3.0)];
    for v in grid(-2.0, 3.0, 40).filter(|v| *v != 0.0) {
        check_exact(&Block::Sign { width: 1 }, &[v], &r, TOL).unwrap();
    }
}

#[test]
fn sign_boundary_admits_both_values() {
    // sign(0) = +1, but the closed big-M rows also allow -1 at exactly 0;
    // verification removes such points with a strict cut
    let b = Block::Sign { width: 1 };
    assert!(check_exact(&b, &[0.0], &[Interval::new(-1.0, 1.0)], TOL).is_err());
}

#[test]
fn input_binarize_is_exact() {
    let b = Block::InputBinarize {
        width: 1,
        threshold: 0.3,
    };
    // within the solver tolerance of the threshold both signs are admitted
    for v in grid(-1.0, 1.0, 40).filter(|v| (v - 0.3).abs() > 1e-9) {
        check_exact(&b, &[v], &[Interval::new(-1.0, 1.0)], TOL).unwrap();
    }
}

#[test]
fn relu_is_exact() {
    for v in grid(-2.0, 1.5, 28) {
        check_exact(&Block::Relu { width: 1 }, &[v], &[Interval::new(-2.0, 1.5)], TOL).unwrap();
    }
}

#[test]
fn batch_norm_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let b = Block::BatchNorm {
            alpha: vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0)],
            gamma: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            mu: vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
            sigma: vec![rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)],
        };
        let x = [rng.gen_range(-5.0..5.0), f64::from(rng.gen_range(-6i32..=6))];
        let r = [Interval::new(-5.0, 5.0), Interval::new(-6.0, 6.0)];
        check_exact(&b, &x, &r, TOL).unwrap();
    }
}

#[test]
fn linear_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let b = Block::RealLinear {
            weights: (0..4).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            bias: Some((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        };
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        check_exact(&b, &x, &[Interval::new(-2.0, 2.0); 6], TOL).unwrap();
    }
    let b = Block::BinaryLinear {
        weights: vec![vec![1, -1, 1], vec![-1, -1, 1]],
        bias: Some(vec![1.0, -2.0]),
    };
    check_exact(&b, &[1.0, -1.0, -1.0], &[Interval::new(-1.0, 1.0); 3], TOL).unwrap();
}

#[test]
fn max_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let b = Block::Max {
        groups: vec![vec![0, 2, 3], vec![1], vec![4, 5]],
    };
    let r = [
        Interval::new(-1.0, 1.0),
        Interval::new(-2.0, 0.0),
        Interval::new(0.0, 3.0),
        Interval::new(-3.0, 2.0),
        Interval::new(-1.0, 1.0),
        Interval::new(-1.0, 1.0),
    ];
    for k in 0..30 {
        let mut x: Vec<f64> = r.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
        if k % 5 == 0 {
            // ties
            x[5] = x[4];
            x[3] = x[2].min(2.0);
        }
        check_exact(&b, &x, &r, TOL).unwrap();
    }
}

/// Every variable is assigned from the forward pass (indicators from the
/// signs), so a correct encoding is satisfied by it whenever the output
/// violates the assertion.
#[test]
fn forward_pass_satisfies_network_encoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for _ in 0..200 {
        let m = if rng.gen_bool(0.5) { random_bnn(&mut rng) } else { random_mixed(&mut rng) };
        let prop = random_property(&mut rng, &m);
        let enc = match encode_network(&m, &prop, &EncodingConfig::default()) {
            Ok(e) => e,
            Err(bnnverify::Error::VacuousAssertion) => continue,
            Err(e) => panic!("{e}"),
        };
        let InputSet::OneBall { center, .. } = &prop.input else { unreachable!() };
        let trace = m.forward_trace(center).unwrap();
        if prop.output.satisfied_by(trace.output()).unwrap() {
            continue;
        }
        // complete an assignment by solving with the layer values pinned
        let mut p = enc.problem.clone();
        let mut pinned = Vec::new();
        for (l, vars) in enc.layers.iter().enumerate() {
            let vals = if l == 0 { center.as_slice() } else { trace.post_activation(l - 1) };
            for (v, x) in vars.iter().zip(vals) {
                pinned.push((*v, *x));
            }
        }
        let names: Vec<String> = pinned.iter().map(|(v, _)| p.variable(*v).name.clone()).collect();
        for ((v, x), n) in pinned.iter().zip(names) {
            p.add_constraint(format!("pin_{n}"), [(*v, 1.0)], bnnverify::mip::Relation::Eq, *x)
                .unwrap();
        }
        let cfg = bnnverify::solver::SolverConfig::default();
        let bnnverify::solver::SolveOutcome::Feasible(a) = bnnverify::solver::solve(&p, &cfg).0 else {
            panic!("forward pass excluded by the encoding\n{}\n{}", m.save(), prop.save())
        };
        assert!(check_assignment(&enc.problem, &Assignment::new(a.values), 1e-6).unwrap().feasible);
        checked += 1;
    }
    assert!(checked > 30, "only {checked} violating centers");
}

#[test]
fn sampled_activations_stay_within_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let m = random_mixed(&mut rng);
        let center: Vec<f64> = (0..m.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = InputSet::InfBall { center: center.clone(), radius: 0.7 };
        let bounds = compute_bounds(&m, &s).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = center.iter().map(|c| c + rng.gen_range(-0.7..=0.7)).collect();
            let trace = m.forward_trace(&x).unwrap();
            for i in 0..m.blocks().len() {
                for (v, iv) in trace.post_activation(i).iter().zip(bounds.block_output(i)) {
                    assert!(iv.contains(*v), "block {i}: {v} outside [{}, {}]", iv.lo, iv.hi);
                }
            }
        }
    }
}

#[test]
fn variable_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let m = random_bnn(&mut rng);
        let prop = random_property(&mut rng, &m);
        let cfg = EncodingConfig {
            eliminate_stable: false,
            ..EncodingConfig::default()
        };
        let Ok(enc) = encode_network(&m, &prop, &cfg) else { continue };
        // one indicator per sign-like unit plus the output selectors
        let sign_units: usize = m.blocks().iter().filter(|b| b.is_sign_like()).map(|b| b.output_width()).sum();
        let selectors = enc.problem.vars_with_role(Role::OutputSelector).len();
        assert_eq!(enc.problem.num_binaries(), sign_units + selectors);
        assert_eq!(enc.sign_sites.len(), sign_units);
        assert!(selectors == 0 || selectors >= 2);
    }
}

#[test]
fn point_query_encoding_has_no_free_binaries_after_bounds() {
    let m = common::random_bnn(&mut ChaCha8Rng::seed_from_u64(11));
    let x: Vec<f64> = vec![1.0; m.input_dim()];
    let prop = Property::new(
        "pt",
        InputSet::point(x),
        OutputAssertion::LabelDominance { target: 0, margin: 0.0 },
    )
    .unwrap();
    let Ok(enc) = encode_network(&m, &prop, &EncodingConfig::default()) else { return };
    // every sign unit is stable at a point
    assert!(enc.sign_sites.iter().all(|s| s.beta.is_none()));
}

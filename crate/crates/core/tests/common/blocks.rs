//! Exactness of single-block encodings, judged against the reference
//! forward pass of a one-block model.

use bnnverify::encoder::{
    encode_batch_norm, encode_input_binarize, encode_linear, encode_max, encode_relu, encode_sign, Interval,
};
use bnnverify::mip::{MipProblem, VarId};
use bnnverify::model::{Block, Model};
use bnnverify::solver::{solve, SolveOutcome, SolverConfig};

/// Inputs and outputs of a one-block encoding.
struct Built {
    problem: MipProblem,
}

/// Encode `block` with inputs fixed to `x`, input ranges `ranges` (used for
/// the big-M constants) and output bounds `out`.
fn build(block: &Block, x: &[f64], ranges: &[Interval], out: &[(f64, f64)]) -> Built {
    let mut p = MipProblem::new();
    let xs: Vec<VarId> = x
        .iter()
        .enumerate()
        .map(|(i, v)| p.add_continuous(format!("x_{i}"), *v, *v, None).unwrap())
        .collect();
    let zs: Vec<VarId> = out
        .iter()
        .enumerate()
        .map(|(j, (lo, hi))| p.add_continuous(format!("z_{j}"), *lo, *hi, None).unwrap())
        .collect();
    match block {
        Block::Sign { .. } => {
            for i in 0..xs.len() {
                encode_sign(&mut p, 1, i, xs[i], zs[i], ranges[i].lo, ranges[i].hi, false).unwrap();
            }
        }
        Block::InputBinarize { threshold, .. } => {
            for i in 0..xs.len() {
                encode_input_binarize(&mut p, i, xs[i], zs[i], *threshold, ranges[i].lo, ranges[i].hi, false).unwrap();
            }
        }
        Block::Relu { .. } => {
            for i in 0..xs.len() {
                encode_relu(&mut p, 1, i, xs[i], zs[i], ranges[i].lo, ranges[i].hi, false).unwrap();
            }
        }
        Block::BatchNorm { alpha, gamma, mu, sigma } => {
            encode_batch_norm(&mut p, 1, &xs, &zs, alpha, gamma, mu, sigma).unwrap();
        }
        Block::RealLinear { weights, bias } => {
            encode_linear(&mut p, 1, weights, bias.as_deref(), &xs, &zs).unwrap();
        }
        Block::BinaryLinear { weights, bias } => {
            let w: Vec<Vec<f64>> = weights.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            encode_linear(&mut p, 1, &w, bias.as_deref(), &xs, &zs).unwrap();
        }
        Block::Max { groups } => {
            for (j, g) in groups.iter().enumerate() {
                let vars: Vec<VarId> = g.iter().map(|&i| xs[i]).collect();
                let b: Vec<Interval> = g.iter().map(|&i| ranges[i]).collect();
                encode_max(&mut p, 1, j, &vars, zs[j], &b).unwrap();
            }
        }
    }
    Built { problem: p }
}

fn feasible(p: &MipProblem) -> bool {
    let cfg = SolverConfig {
        feasibility_tol: 1e-11,
        ..SolverConfig::default()
    };
    matches!(solve(p, &cfg).0, SolveOutcome::Feasible(_))
}

/// Check that the encoding of `block` at input `x` admits the reference
/// output and nothing further than `tol · (1 + |f|)` from it in any
/// coordinate. Returns a description of the first failure.
pub fn check_exact(block: &Block, x: &[f64], ranges: &[Interval], tol: f64) -> Result<(), String> {
    let m = Model::new("block", x.len(), vec![block.clone()]).map_err(|e| e.to_string())?;
    let f = m.forward(x).map_err(|e| e.to_string())?;
    let wide = 1e6;
    let pinned: Vec<(f64, f64)> = f.iter().map(|v| (*v, *v)).collect();
    if !feasible(&build(block, x, ranges, &pinned).problem) {
        return Err(format!("reference output {f:?} infeasible at {x:?}"));
    }
    // ReLU outputs are non-negative by their variable bounds, as in a
    // network encoding
    let floor = if matches!(block, Block::Relu { .. }) { 0.0 } else { -wide };
    for j in 0..f.len() {
        let d = tol * (1.0 + f[j].abs());
        for (lo, hi) in [(f[j] + d, wide), (floor, f[j] - d)] {
            if lo > hi {
                continue;
            }
            let mut out = vec![(floor, wide); f.len()];
            out[j] = (lo, hi);
            if feasible(&build(block, x, ranges, &out).problem) {
                return Err(format!("output {j} can leave {} at {x:?} (range [{lo}, {hi}])", f[j]));
            }
        }
    }
    Ok(())
}

//! Ground truth by exhaustive enumeration, for small instances.
//!
//! After an input-binarize block a network only sees which side of the
//! threshold each coordinate falls on, so an input set is covered by one
//! representative per reachable sign pattern. Models without input
//! binarization are refused unless the input set is a single point.

use crate::error::{Error, Result};
use crate::model::{sign, Model};
use crate::property::{InputSet, Property};
use crate::solver::{repair_input, Counterexample, Verdict};

/// Default cap on the number of free binary coordinates.
pub const DEFAULT_CAP: usize = 20;

/// A finite list of inputs covering every behavior of a model on a set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerableInputSet {
    inputs: Vec<Vec<f64>>,
}

impl EnumerableInputSet {
    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn enumerate_inputs(m: &Model, s: &InputSet) -> Result<EnumerableInputSet> {
    enumerate_inputs_capped(m, s, DEFAULT_CAP)
}

fn check_cap(free: usize, cap: usize) -> Result<()> {
    if free > cap {
        return Err(Error::TooLarge { found: free, cap });
    }
    Ok(())
}

/// Like [`enumerate_inputs`] with an explicit cap on free coordinates.
pub fn enumerate_inputs_capped(m: &Model, s: &InputSet, cap: usize) -> Result<EnumerableInputSet> {
    s.validate()?;
    if s.dim() != m.input_dim() {
        return Err(Error::Dimension {
            context: "input set",
            expected: m.input_dim(),
            found: s.dim(),
        });
    }
    if let Some(x) = s.as_point() {
        return Ok(EnumerableInputSet { inputs: vec![x] });
    }
    let Some(t) = m.input_threshold() else {
        return Err(Error::NotEnumerable("model has no input-binarize block".into()));
    };
    let inputs = match s {
        InputSet::Box { .. } | InputSet::InfBall { .. } => {
            let (lo, hi) = s.box_hull().expect("boxes and balls have a hull");
            // extreme members, exactly inside the set
            let lo = repair_input(s, &lo);
            let hi = repair_input(s, &hi);
            let straddling: Vec<usize> = (0..lo.len())
                .filter(|&j| sign(lo[j] - t) < 0 && sign(hi[j] - t) > 0)
                .collect();
            check_cap(straddling.len(), cap)?;
            (0..1u64 << straddling.len())
                .map(|mask| {
                    let mut x = hi.clone();
                    for (k, &j) in straddling.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            x[j] = lo[j];
                        }
                    }
                    x
                })
                .collect()
        }
        InputSet::OneBall { center, radius } => {
            // the cheapest input crossing the threshold, per coordinate
            let flipped = |c: f64| if sign(c - t) > 0 { t.next_down() } else { t };
            let flippable: Vec<usize> = (0..center.len())
                .filter(|&j| (flipped(center[j]) - center[j]).abs() <= *radius)
                .collect();
            check_cap(flippable.len(), cap)?;
            (0..1u64 << flippable.len())
                .filter_map(|mask| {
                    let mut x = center.clone();
                    for (k, &j) in flippable.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            x[j] = flipped(center[j]);
                        }
                    }
                    s.contains(&x).ok()?.then_some(x)
                })
                .collect()
        }
        InputSet::Polytope { .. } => {
            return Err(Error::NotEnumerable("polytope input sets are not enumerated".into()));
        }
    };
    Ok(EnumerableInputSet { inputs })
}

/// Decide `prop` by evaluating the model on every enumerated input.
pub fn brute_force_verify(m: &Model, prop: &Property) -> Result<Verdict> {
    prop.check_dims(m.input_dim(), m.output_dim())?;
    for x in enumerate_inputs(m, &prop.input)?.inputs {
        let trace = m.forward_trace(&x)?;
        if !prop.output.satisfied_by(trace.output())? {
            return Ok(Verdict::CounterexampleFound(Counterexample {
                output: trace.output().to_vec(),
                input: x,
                trace,
            }));
        }
    }
    Ok(Verdict::Holds)
}

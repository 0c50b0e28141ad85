//! Verification of binarized and partially binarized feed-forward networks.
//!
//! A network ([`model::Model`]) and a property ([`property::Property`],
//! `x ∈ 𝒳 ⟹ F(x) ∈ 𝒴`) are encoded as a mixed-integer feasibility problem
//! ([`encoder::encode_network`]) whose solutions are exactly the inputs that
//! violate the property. The branch-and-bound solver either exhausts the
//! search and proves the property, or returns an input that is re-checked
//! by exact forward evaluation ([`solver::verify`]).
//!
//! The `examples/` directory walks through each capability:
//!
//! - `toy_verify`: prove and refute properties of a 2-2-2 network
//! - `mnist_robustness`: ℓ∞ robustness of the bundled MNIST network
//! - `export_lp`: write an encoding in CPLEX LP format
//! - `bounds_and_encoding`: inspect interval bounds and encoder output
//! - `oracle_crosscheck`: compare the solver with exhaustive enumeration
//! - `partially_binarized`: ReLU and max blocks next to binary layers
//! - `bench_table`: the robustness benchmark report

// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod encoder;
pub mod error;
pub mod mip;
pub mod model;
pub mod oracle;
pub mod property;
pub mod solver;

pub use error::{Error, Result};

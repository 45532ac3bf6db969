//! Finite causal models with cycles: exact solving, interventions, affects
//! relations, cycle certification and Minkowski embedding checks.

pub mod certify;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod intervention;
pub mod minkowski;
pub mod model_file;
pub mod prob;
pub mod scm;

pub use graph::{Graph, Node, NodeKind};
pub use prob::{Assignment, JointDistribution, Rational};
pub use scm::{CausalModel, Expr, Mechanism, ModelError, Noise};

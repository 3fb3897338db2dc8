//! Cached multi-tensor contraction for computing many amplitudes of a
//! quantum circuit from one contraction plan.
//!
//! The pipeline: parse a [`Circuit`], turn it into a [`NetworkDiagram`],
//! bind requested bitstrings with [`build_assignments`], pick a [`Plan`]
//! (see [`optimizer::anneal`]) and evaluate it with [`multieval::eval_all`].

pub mod circuit;
pub mod error;
pub mod multieval;
pub mod network;
pub mod optimizer;
pub mod plan;
pub mod tensor;
pub mod xeb;

pub use circuit::{parse_circuit, Circuit, Gate, GateKind};
pub use error::{Error, Result};
pub use network::{build_assignments, to_diagram, AssignmentSet, NetworkDiagram};
pub use plan::{AnnotatedPlan, CostConfig, Multiplicity, Plan, Rule, Tree, Workload};
pub use tensor::{contract_pair, Leg, LegId, OpCounters, Shape, Tensor};

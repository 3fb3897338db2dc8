use crate::tensor::LegId;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("leg dim conflict on leg {leg}: {left} vs {right}")]
    LegDimConflict {
        leg: LegId,
        left: usize,
        right: usize,
    },

    #[error("malformed tensor: {0}")]
    MalformedTensor(String),

    #[error("unknown leg {0}")]
    UnknownLeg(LegId),

    #[error("index {value} out of range for leg {leg} of dim {dim}")]
    IndexOutOfRange {
        leg: LegId,
        value: usize,
        dim: usize,
    },

    #[error("hyperedge: leg {0} is attached to more than two tensors")]
    Hyperedge(LegId),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("plan parse error at byte {pos}: {msg}")]
    PlanSyntax { pos: usize, msg: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("bitstring {index}: {msg}")]
    Bitstring { index: usize, msg: String },

    #[error("plan does not match network: {0}")]
    PlanMismatch(String),

    #[error("rewrite not applicable: {0}")]
    RewriteNotApplicable(String),

    #[error("cannot slice leg {leg}: {reason}")]
    InvalidSlice { leg: LegId, reason: &'static str },

    #[error("memory cap exceeded at subexpression {node}: {bytes} bytes resident, cap {cap}")]
    MemoryCapExceeded { node: usize, bytes: u64, cap: u64 },

    #[error("cost overflow: contraction too large to account for")]
    CostOverflow,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("probability {value} at position {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(&'static str),
}

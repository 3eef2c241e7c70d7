use thiserror::Error;

use crate::lattice::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("horizon must be positive and finite, got {0}")]
    NonPositiveHorizon(f64),

    #[error("lattice needs at least one step")]
    NoSteps,

    #[error("full-tree lattice limited to {max} steps, got {steps}")]
    TreeTooDeep { steps: usize, max: usize },

    #[error("node {0} is terminal and has no children")]
    TerminalNode(NodeId),

    #[error("node {0} does not belong to the lattice")]
    InvalidNode(NodeId),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "time step too coarse: dt * lipschitz = {product:.6} > 0.5; need at least {required_steps} steps"
    )]
    StepTooCoarse { product: f64, required_steps: usize },

    #[error("fixed-point iteration did not converge at node {node} after {iterations} iterations")]
    NoConvergence { node: NodeId, iterations: usize },

    #[error("no payoff available at stopping node {0}")]
    MissingPayoff(NodeId),

    #[error("process shape does not match lattice")]
    ShapeMismatch,

    #[error("terminal value {value} at node {node} outside barrier band [{lower}, {upper}]")]
    TerminalOutOfBand {
        node: NodeId,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("lower barrier {lower} exceeds upper barrier {upper} at node {node}")]
    BarrierCrossing { node: NodeId, lower: f64, upper: f64 },

    #[error("enumeration over {eligible} nodes exceeds the cap of {cap}")]
    EnumerationTooLarge { eligible: usize, cap: usize },

    #[error("generator is not coherent (g(t, y, 0) != 0)")]
    NonCoherentGenerator,

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("penalization ladder needs at least two levels, got {0}")]
    LadderTooShort(usize),

    #[error("terminal sequence is not nondecreasing at element {index}, node {node}")]
    NotMonotone { index: usize, node: NodeId },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Dynkin stopping games evaluated under nonlinear g-expectations on a
//! random-walk lattice.
//!
//! The pieces, bottom up:
//!
//! - [`lattice`]: the discrete filtration and node-indexed processes.
//! - [`generators`]: driver and constraint families.
//! - [`bsde`]: the one-step g-expectation, backward solver and hitting rules.
//! - [`rbsde`]: doubly reflected recursion and its penalized variant.
//! - [`dynkin`]: game value, saddle rules and the enumeration oracle.
//! - [`constrained`]: penalization ladder for constrained games.
//! - [`scenario`]: config files, pipelines and reports.

pub mod bsde;
pub mod constrained;
pub mod dynkin;
pub mod error;
pub mod generators;
pub mod lattice;
pub mod properties;
pub mod rbsde;
pub mod scenario;

pub use bsde::{evaluate_at_rule, one_step, solve_bsde, StoppingRule};
pub use constrained::{
    constrained_report, continuity_from_below_check, run_ladder, ConstrainedReport,
    ContinuityReport, LadderOptions, PenalizationLadder,
};
pub use dynkin::{
    enumerate_rules, evaluate_pair, game_value, saddle_times, verify_saddle, GameInstance,
    SaddleReport,
};
pub use error::{Error, Result};
pub use generators::{validate_step, ConstraintSpec, Driver, GeneratorSpec};
pub use lattice::{AdaptedProcess, Lattice, LatticeMode, NodeId};
pub use rbsde::{
    skorokhod_residuals, solve_drbsde, solve_drbsde_penalized, BarrierSpec, Barriers,
    NodeFunction, SolutionTriple,
};

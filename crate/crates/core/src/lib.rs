//! Training of discrete linear classification models by exact integer
//! programming: integer scoring systems, personalized coefficient-set models,
//! M-of-N rule tables, and threshold-rule models, together with the
//! supporting machinery (branch-and-bound MILP solver, loss-decomposition
//! loop, optimality-preserving data reduction, and discretization /
//! generalization bound calculators).

#![forbid(unsafe_code)]

pub mod bounds;
pub mod config;
pub mod data;
pub mod evaluate;
pub mod exec;
pub mod formulation;
pub mod interp;
pub mod loss_decomposition;
pub mod milp;
pub mod pipeline;
pub mod program;
pub mod reduction;
pub mod render;
pub mod simplex;
pub mod synth;

pub use data::{BinaryRuleSet, ClassWeights, Dataset};
pub use formulation::{
    BuiltModel, ModelFamily, OperationalConstraints, SlimPenalty, TilmPenalty, ZeroExcludedBy,
};
pub use interp::InterpretabilitySet;
pub use milp::{SolveOptions, SolveResult, SolveStatus};

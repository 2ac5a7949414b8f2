//! Affine matrix inequalities: variables, expressions, assembly, solving, export.

pub mod assemble;
pub mod expr;
pub mod ipm;
pub mod problem;
pub mod sdpa;
pub mod solve;

pub use assemble::{
    assemble_decomposed, assemble_decomposed_efbsp, assemble_dual_efbsp, assemble_fbsp_analysis,
    assemble_primal_efbsp, AssemblyOptions, MultiplierMode, Performance, StructureMode,
};
pub use expr::LinMat;
pub use ipm::InteriorPointBackend;
pub use problem::{Constraint, DecisionVar, LmiProblem, Sense, Structure, VarValue};
pub use sdpa::{export_sdpa, SdpaDoc};
pub use solve::{solve, Backend, ClarabelBackend, ConicProgram, FallbackBackend, SolveOutcome, SolveStatus};

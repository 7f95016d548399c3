//! Block-PSD programs and the ADMM solver used for every relaxation.

mod admm;
mod problem;
mod program;
mod relax;

pub use admm::{project_psd, solve, SolveResult, SolverParams, Status, WarmStart};
pub use problem::{LinearConstraint, Mode, PsdBlock, SdpProblem};
pub use program::{CompiledProgram, Extraction, MomentProgram};
pub use relax::{
    assemble_sos_sdp, coupled_poly, decoupled_basis, decoupled_poly, matrix_tensor, solve_bilinear_sdp, tensor_space, Axiom,
    BasisPattern, Objective,
    Relaxation, RelaxationSpec, SosSolution,
};

//! Finite-volume discretization of the divergence-form operator and pathwise
//! time stepping.

mod coefficient;
mod nonlinear;
mod scheme;

pub use coefficient::CoefficientField;
pub use nonlinear::{NonlinearityReport, NonlinearitySpec, ScalarFunction};
pub use scheme::{
    assemble_operator, solve, solve_implicit, step, sup_l2_distance, uniqueness_probe, variational_residual,
    DiffusionOperator, ImplicitSystem, InitialCondition, Problem, ResidualTerms, SolutionTrajectory, TimeProfile,
    TrajectoryStatus, UniquenessReport,
};

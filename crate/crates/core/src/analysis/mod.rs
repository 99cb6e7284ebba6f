//! Jacobian of the SCF map at a fixed point, its spectral radius and the
//! bounds on it.

pub mod bounds;
pub mod gaps;
pub mod jacobian;
pub mod report;

pub use bounds::{
    bound_c2, bound_cyclic, bound_gap, bound_gap_all, bound_liu, bound_naive, bound_rank_truncated, convergence_factor,
    cyclic_spectral_radii, phase_invariance_residual,
};
pub use gaps::{gap_structure, GapPair, GapStructure};
pub use jacobian::{
    assemble_from_eigenpairs, assemble_jacobian, column_errors, default_fd_step, fermi_jacobian, jacobian_fd,
    max_column_error, realified_jacobian, realified_jacobian_fd, AssemblyRoute, JacobianBundle,
};
pub use report::{analyze, analyze_fixed_point, AnalysisOptions, ConvergenceReport};

//! Symmetric nonlocal Lévy operators on a bounded interval: kernels, pointwise
//! operators, Galerkin assembly of the nonlocal energy form, complement value
//! problem solvers, spectra and spectral evolutions, and the nonlocal-to-local
//! convergence harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Crate version, echoed in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod assembly;
pub mod constants;
pub mod convergence;
pub mod error;
pub mod field;
pub mod kernels;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod solvers;
pub mod special;
pub mod spectral;

pub use error::{NonlocalError, Result};
pub use kernels::{
    make_kernel, CustomDensity, KernelFamily, KernelParams, KernelSpec, Normalization,
    WeightKind, WeightSpec,
};
pub use field::{FunctionSpec, Jet, Regularity, ScalarField, Support};
pub use assembly::{
    assemble_forms, assemble_load, build_mesh, seminorm_e, ComplementWeight, DiscreteField,
    GalerkinForms, Mesh1D, NodeTag, TailMode,
};
pub use solvers::{
    check_compatibility, solve, ComplementProblem, HelmholtzCondition, ProblemKind, Solution,
};
pub use spectral::{
    dtn_matrix, eig, poincare_constant, rayleigh_residual, Condition, ConditionKind, DtNMap,
    PoincareMode, Spectrum,
};
pub use convergence::{
    bbm_sweep, collapse_check, eigen_convergence, limit_coefficient, local_solve,
    sharp_constant_sweep, solution_convergence, LocalKind, LocalOracle, SweepMesh, SweepProblem,
    SweepReport, Verdict,
};

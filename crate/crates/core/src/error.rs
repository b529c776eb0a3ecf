use thiserror::Error;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlocalError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("gamma function pole at non-positive integer {0}")]
    GammaPole(f64),

    #[error("kernel is not Levy-integrable: {0}")]
    NonLevy(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("field regularity is insufficient: {0}")]
    Regularity(String),

    #[error("nonlocal normal derivative evaluated at boundary point {0}")]
    SingularEvaluation(f64),

    #[error("degenerate interval ({a}, {b})")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("bilinear form is not finite on P1 fields: singular exponent {0} >= 2")]
    NonIntegrableForm(f64),

    #[error("field and forms live on different meshes")]
    MeshMismatch,

    #[error("Neumann data violate the compatibility condition (int f + int g = 0): residual {residual:e}")]
    Incompatible { residual: f64 },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("Robin weight beta * nu_K vanishes on the collar; the Robin form is not coercive")]
    RobinPrecondition,

    #[error("mixed problem needs a non-empty Dirichlet set")]
    EmptyDirichletSet,

    #[error("resonant Helmholtz parameter: eigenvalue #{index} = {eigenvalue} and the data has projection {projection:e} on its eigenspace")]
    Resonance {
        index: usize,
        eigenvalue: f64,
        projection: f64,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),
}

pub type Result<T> = std::result::Result<T, NonlocalError>;

//! Run configuration: JSON schema with unknown keys rejected, plus flag
//! overrides.

use nonlocal_core::convergence::DEFAULT_ALPHA_GRID;
use nonlocal_core::{FunctionSpec, KernelFamily, KernelParams, Normalization, TailMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Constants,
    Apply,
    Solve,
    Eigs,
    Evolve,
    Dtn,
    Sweep,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelParams>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apply: Option<ApplyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtn: Option<DtnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A catalog function, or a two-column `x,y` CSV table read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionInput {
    File(FileTable),
    Spec(FunctionSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileTable {
    pub file: String,
}

impl From<FunctionSpec> for FunctionInput {
    fn from(s: FunctionSpec) -> Self {
        FunctionInput::Spec(s)
    }
}

impl FunctionInput {
    /// Resolve to a catalog spec, reading table files.
    pub fn resolve(&self) -> Result<FunctionSpec, String> {
        match self {
            FunctionInput::Spec(s) => Ok(s.clone()),
            FunctionInput::File(t) => {
                let text = std::fs::read_to_string(&t.file)
                    .map_err(|e| format!("cannot read table {}: {e}", t.file))?;
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut cols = line.split(',').map(str::trim);
                    let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                        return Err(format!("{}:{}: expected two columns", t.file, lineno + 1));
                    };
                    match (a.parse::<f64>(), b.parse::<f64>()) {
                        (Ok(a), Ok(b)) => {
                            x.push(a);
                            y.push(b);
                        }
                        // A header row is allowed on the first line only.
                        _ if lineno == 0 => continue,
                        _ => return Err(format!("{}:{}: not a number", t.file, lineno + 1)),
                    }
                }
                Ok(FunctionSpec::Table { x, y })
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Neumann compatibility tolerance; the solver default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compat: Option<f64>,
    /// Largest accepted algebraic residual of a solve or eigenpair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "half")]
    pub collar: f64,
    #[serde(default = "default_tail")]
    pub tail_mode: TailMode,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            n: default_n(),
            collar: half(),
            tail_mode: default_tail(),
            quad_order: default_quad(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one_u32")]
    pub d: u32,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "two")]
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    /// Pointwise `L u` on the line.
    L,
    /// Normal derivative on the complement of the domain.
    N,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyConfig {
    #[serde(default = "op_l")]
    pub operator: OperatorName,
    pub u: FunctionInput,
    #[serde(default)]
    pub points: Vec<f64>,
    /// `[lo, hi, count]`, appended to `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<(f64, f64, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKindName {
    Dirichlet,
    Neumann,
    Robin,
    Mixed,
    Helmholtz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataWeight {
    /// Raw complement data.
    None,
    /// Data multiplied by `nu_K`.
    NuK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceName {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKindName,
    #[serde(default = "zero_fn")]
    pub f: FunctionInput,
    #[serde(default = "zero_fn")]
    pub g: FunctionInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_flux: Option<FunctionInput>,
    #[serde(default = "no_weight")]
    pub g_weight: DataWeight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<FunctionInput>,
    /// Interval `K` of `nu_K`; defaults to the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_k: Option<(f64, f64)>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "neumann_space")]
    pub helmholtz_condition: SpaceName,
    /// Complement intervals whose nodes carry Dirichlet data (mixed).
    #[serde(default)]
    pub dirichlet_region: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionName {
    Neumann,
    Dirichlet,
    Robin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "neumann_cond")]
    pub condition: ConditionName,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<FunctionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_k: Option<(f64, f64)>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            condition: neumann_cond(),
            k: default_k(),
            beta: None,
            weight_k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Heat,
    Schrodinger,
    Wave,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub equation: Equation,
    #[serde(default = "neumann_space")]
    pub condition: SpaceName,
    pub u0: FunctionInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<FunctionInput>,
    /// Time-independent heat source on the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<FunctionInput>,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtnConfig {
    #[serde(default)]
    pub lambda: f64,
    /// Number of Robin-link pairs checked.
    #[serde(default = "two_usize")]
    pub robin_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_k: Option<(f64, f64)>,
}

impl Default for DtnConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            robin_pairs: 2,
            weight_k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Bbm,
    Collapse,
    Poincare,
    Solution,
    Eigs,
    Coefficient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SweepKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<KernelFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<FunctionInput>,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "dirichlet_space")]
    pub problem: SpaceName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FunctionInput>,
    #[serde(default = "dirichlet_space")]
    pub condition: SpaceName,
    #[serde(default = "two_usize")]
    pub k: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: None,
            grid: None,
            family: None,
            u: None,
            p: 2.0,
            delta: 1.0,
            problem: SpaceName::Dirichlet,
            f: None,
            g: None,
            condition: SpaceName::Dirichlet,
            k: 2,
        }
    }
}

impl SweepConfig {
    pub fn default_grid(kind: SweepKind) -> Vec<f64> {
        match kind {
            SweepKind::Bbm => vec![0.5, 0.9, 0.99],
            SweepKind::Coefficient => vec![1.9, 1.95, 1.99],
            _ => DEFAULT_ALPHA_GRID.to_vec(),
        }
    }

    pub fn default_family(kind: SweepKind) -> KernelFamily {
        let normalization = match kind {
            SweepKind::Collapse => Normalization::HalfC,
            _ => Normalization::ExactC,
        };
        KernelFamily::Fractional {
            normalization,
            factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Also write the assembled form matrix (`solve`, `eigs`).
    #[serde(default)]
    pub export_form: bool,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn one_u32() -> u32 {
    1
}
fn two_usize() -> usize {
    2
}
fn default_n() -> usize {
    64
}
fn default_k() -> usize {
    10
}
fn default_samples() -> usize {
    11
}
fn default_quad() -> usize {
    4
}
fn default_tail() -> TailMode {
    TailMode::Drop
}
fn op_l() -> OperatorName {
    OperatorName::L
}
fn zero_fn() -> FunctionInput {
    FunctionInput::Spec(FunctionSpec::Constant { value: 0.0 })
}
fn no_weight() -> DataWeight {
    DataWeight::None
}
fn neumann_space() -> SpaceName {
    SpaceName::Neumann
}
fn dirichlet_space() -> SpaceName {
    SpaceName::Dirichlet
}
fn neumann_cond() -> ConditionName {
    ConditionName::Neumann
}

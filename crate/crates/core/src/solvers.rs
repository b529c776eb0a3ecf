//! Complement value problems on assembled forms: Dirichlet, Neumann, Robin,
//! mixed and Helmholtz.
//!
//! Complement nodes couple to each other only through a tridiagonal block,
//! so they are eliminated by static condensation before any dense solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{
    complement_load, complement_mass, omega_load, ComplementWeight, DiscreteField, GalerkinForms,
    NodeTag, TailMode,
};
use crate::error::{NonlocalError, Result};
use crate::field::{Regularity, ScalarField, Support};
use crate::kernels::{WeightKind, WeightSpec};
use crate::linalg::{solve_refined, subvector, submatrix, Condensed, SymTridiag};
use crate::spectral::{eig, Condition, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Dirichlet,
    Neumann,
    Robin,
    Mixed,
    Helmholtz,
}

/// Which space a Helmholtz problem lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelmholtzCondition {
    Neumann,
    Dirichlet,
}

/// Data of a complement value problem.
#[derive(Debug, Clone)]
pub struct ComplementProblem {
    pub kind: ProblemKind,
    /// Load on `Omega`.
    pub f: ScalarField,
    /// Dirichlet trace or Neumann flux on the complement.
    pub g: ScalarField,
    /// Weight applied to Neumann data.
    pub g_weight: ComplementWeight,
    /// Robin coefficient.
    pub beta: Option<ScalarField>,
    /// Interval `K` of the Robin weight `nu_K`.
    pub weight_k: Option<(f64, f64)>,
    pub lambda: f64,
    pub helmholtz_condition: HelmholtzCondition,
    /// Complement node indices carrying Dirichlet data (mixed problems);
    /// the remaining complement nodes form the Neumann set.
    pub d_set: Vec<usize>,
    /// Neumann flux on the Neumann set of a mixed problem; zero when absent.
    pub g_flux: Option<ScalarField>,
    pub compat_tol: Option<f64>,
}

impl ComplementProblem {
    pub fn new(kind: ProblemKind, f: ScalarField, g: ScalarField) -> Self {
        Self {
            kind,
            f,
            g,
            g_weight: ComplementWeight::None,
            beta: None,
            weight_k: None,
            lambda: 0.0,
            helmholtz_condition: HelmholtzCondition::Neumann,
            d_set: Vec::new(),
            g_flux: None,
            compat_tol: None,
        }
    }
}

/// Solution with its algebraic residual.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: DiscreteField,
    /// Max-norm residual of the solved equations.
    pub residual: f64,
    /// `|int f + int g|` for Neumann-type problems.
    pub compat_residual: Option<f64>,
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn abs_field(u: &ScalarField) -> ScalarField {
    let u = u.clone();
    ScalarField::from_fn(move |x| u.eval(x).abs(), Support::Global, vec![], Regularity::AnalyticTest)
}

fn neumann_load(forms: &GalerkinForms, p: &ComplementProblem) -> Result<(Vec<f64>, f64)> {
    let bf = omega_load(&forms.mesh, &p.f)?;
    let bg = complement_load(&forms.mesh, &p.g, &p.g_weight)?;
    let norm = l1(&omega_load(&forms.mesh, &abs_field(&p.f))?)
        + l1(&complement_load(&forms.mesh, &abs_field(&p.g), &p.g_weight)?);
    Ok((bf.iter().zip(&bg).map(|(a, b)| a + b).collect(), norm))
}

/// `|int_Omega f + int_{Omega^c} g|` (weighted when a weight is set).
pub fn check_compatibility(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<f64> {
    let (b, _) = neumann_load(forms, problem)?;
    Ok(b.iter().sum::<f64>().abs())
}

fn robin_weight(forms: &GalerkinForms, k: Option<(f64, f64)>) -> Result<WeightSpec> {
    let k = k.unwrap_or((forms.mesh.a, forms.mesh.b));
    WeightSpec::new(forms.kernel.clone(), k, WeightKind::Essinf)
}

/// `int_{T \ Omega} beta nu_K phi_i phi_j`; errors when the weighted mass
/// vanishes.
pub fn robin_mass(
    forms: &GalerkinForms,
    beta: &ScalarField,
    k: Option<(f64, f64)>,
) -> Result<SymTridiag> {
    let w = robin_weight(forms, k)?;
    let mc = complement_mass(&forms.mesh, &ComplementWeight::Scaled(beta.clone(), w))?;
    if mc.diag.iter().any(|d| *d < 0.0) {
        return Err(NonlocalError::Domain("Robin coefficient must be nonnegative".into()));
    }
    let total: f64 = mc.diag.iter().sum();
    let scale: f64 = forms.m.diag.iter().sum::<f64>().max(1.0);
    if !(total > 1e-14 * scale) {
        return Err(NonlocalError::RobinPrecondition);
    }
    Ok(mc)
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Dirichlet problem at matrix level: unknowns are the interior nodes,
/// all other nodes carry `g`.
pub fn dirichlet_system(forms: &GalerkinForms, load: &[f64], g: &[f64]) -> Result<Solution> {
    let mesh = &forms.mesh;
    let inner = mesh.indices(NodeTag::Interior);
    let outer = mesh.exterior_closure();
    let a_ii = submatrix(&forms.e, &inner, &inner);
    let a_io = submatrix(&forms.e, &inner, &outer);
    let g_o = subvector(g, &outer);
    let rhs = subvector(load, &inner) - &a_io * &g_o;
    let ui = solve_refined(&a_ii, &rhs)?;
    let residual = (&a_ii * &ui - &rhs).amax();
    let mut u = vec![0.0; mesh.len()];
    for (k, &i) in outer.iter().enumerate() {
        u[i] = g_o[k];
    }
    for (k, &i) in inner.iter().enumerate() {
        u[i] = ui[k];
    }
    Ok(Solution {
        u: DiscreteField::new(mesh.clone(), u)?,
        residual,
        compat_residual: None,
    })
}

pub fn solve_dirichlet(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    let mesh = &forms.mesh;
    let mut load = omega_load(mesh, &problem.f)?;
    if forms.tail_mode == TailMode::DirichletConst {
        let (lo, hi) = mesh.universe();
        let (gl, gr) = (problem.g.eval(lo), problem.g.eval(hi));
        for ((l, tl), tr) in load.iter_mut().zip(&forms.tail_load_left).zip(&forms.tail_load_right) {
            *l += gl * tl + gr * tr;
        }
    }
    let g: Vec<f64> = mesh.nodes.iter().map(|&x| problem.g.eval(x)).collect();
    dirichlet_system(forms, &load, &g)
}

/// Neumann problem at matrix level with the mean-zero constraint on
/// `Omega`. Errors when `|sum(load)| > tol`.
pub fn neumann_system(forms: &GalerkinForms, load: &[f64], tol: f64) -> Result<Solution> {
    if forms.tail_mode != TailMode::Drop {
        return Err(NonlocalError::Domain(
            "Neumann problems need tail_mode = drop".into(),
        ));
    }
    let compat = load.iter().sum::<f64>().abs();
    if compat > tol {
        return Err(NonlocalError::Incompatible { residual: compat });
    }
    let mesh = &forms.mesh;
    let p = mesh.omega_closure();
    let cond = Condensed::new(&forms.e, &p, &mesh.complement())?;
    for &i in &cond.inactive {
        if load[i].abs() > tol.max(1e-300) {
            return Err(NonlocalError::Incompatible {
                residual: load[i].abs(),
            });
        }
    }
    let np = p.len();
    let ones = vec![1.0; mesh.len()];
    let mvec = subvector(&forms.m.mul_vec(&ones), &p);
    let mut k = DMatrix::zeros(np + 1, np + 1);
    k.view_mut((0, 0), (np, np)).copy_from(&cond.schur);
    for i in 0..np {
        k[(i, np)] = mvec[i];
        k[(np, i)] = mvec[i];
    }
    let red = cond.reduce_rhs(load)?;
    let mut rhs = DVector::zeros(np + 1);
    rhs.rows_mut(0, np).copy_from(&red);
    let sol = solve_refined(&k, &rhs)?;
    let up = sol.rows(0, np).clone_owned();
    let u = cond.expand(&up, load, mesh.len())?;
    let ux = DVector::from_column_slice(&u);
    let r = &forms.e * &ux - DVector::from_column_slice(load);
    let active: Vec<usize> = (0..mesh.len())
        .filter(|i| !cond.inactive.contains(i))
        .collect();
    // the multiplier absorbs the (tolerated) compatibility defect
    let lam = sol[np];
    let residual = max_abs(active.iter().map(|&i| {
        let mi = if i >= p[0] && i <= p[np - 1] { mvec[i - p[0]] } else { 0.0 };
        r[i] + lam * mi
    }));
    Ok(Solution {
        u: DiscreteField::new(mesh.clone(), u)?,
        residual,
        compat_residual: Some(compat),
    })
}

pub fn solve_neumann(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    let (load, norm) = neumann_load(forms, problem)?;
    let tol = problem.compat_tol.unwrap_or(1e-10 * norm);
    neumann_system(forms, &load, tol)
}

/// `(E + Mc) u = load`, condensing the complement.
pub fn robin_system(forms: &GalerkinForms, load: &[f64], mc: &SymTridiag) -> Result<Solution> {
    if !(mc.diag.iter().sum::<f64>() > 0.0) {
        return Err(NonlocalError::RobinPrecondition);
    }
    let mesh = &forms.mesh;
    let mut a = forms.e.clone();
    mc.add_to_dense(&mut a, 1.0);
    let p = mesh.omega_closure();
    let cond = Condensed::new(&a, &p, &mesh.complement())?;
    let red = cond.reduce_rhs(load)?;
    let up = solve_refined(&cond.schur, &red)?;
    let u = cond.expand(&up, load, mesh.len())?;
    let r = &a * DVector::from_column_slice(&u) - DVector::from_column_slice(load);
    let residual = max_abs(
        (0..mesh.len())
            .filter(|i| !cond.inactive.contains(i))
            .map(|i| r[i]),
    );
    Ok(Solution {
        u: DiscreteField::new(mesh.clone(), u)?,
        residual,
        compat_residual: None,
    })
}

pub fn solve_robin(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    let beta = problem
        .beta
        .as_ref()
        .ok_or_else(|| NonlocalError::Domain("Robin problem needs beta".into()))?;
    let mc = robin_mass(forms, beta, problem.weight_k)?;
    let mesh = &forms.mesh;
    let bf = omega_load(mesh, &problem.f)?;
    let bg = complement_load(mesh, &problem.g, &problem.g_weight)?;
    let load: Vec<f64> = bf.iter().zip(&bg).map(|(a, b)| a + b).collect();
    robin_system(forms, &load, &mc)
}

/// Mixed problem: boundary nodes and `d_set` carry `g`, the remaining
/// complement nodes are Neumann unknowns.
pub fn mixed_system(
    forms: &GalerkinForms,
    load: &[f64],
    d_set: &[usize],
    g: &[f64],
) -> Result<Solution> {
    if d_set.is_empty() {
        return Err(NonlocalError::EmptyDirichletSet);
    }
    let mesh = &forms.mesh;
    for &i in d_set {
        if i >= mesh.len() || mesh.tags[i] != NodeTag::Complement {
            return Err(NonlocalError::Domain(format!(
                "Dirichlet set index {i} is not a complement node"
            )));
        }
    }
    let scale = forms.e.diagonal().amax();
    let mut known: Vec<usize> = mesh.indices(NodeTag::Boundary);
    known.extend_from_slice(d_set);
    known.sort_unstable();
    known.dedup();
    let unknown: Vec<usize> = (0..mesh.len())
        .filter(|i| known.binary_search(i).is_err())
        .filter(|&i| forms.e[(i, i)].abs() > 1e-14 * scale)
        .collect();
    let a_uu = submatrix(&forms.e, &unknown, &unknown);
    let a_uk = submatrix(&forms.e, &unknown, &known);
    let g_k = subvector(g, &known);
    let rhs = subvector(load, &unknown) - &a_uk * &g_k;
    let uu = solve_refined(&a_uu, &rhs)?;
    let residual = (&a_uu * &uu - &rhs).amax();
    let mut u = vec![0.0; mesh.len()];
    for (k, &i) in known.iter().enumerate() {
        u[i] = g_k[k];
    }
    for (k, &i) in unknown.iter().enumerate() {
        u[i] = uu[k];
    }
    Ok(Solution {
        u: DiscreteField::new(mesh.clone(), u)?,
        residual,
        compat_residual: None,
    })
}

pub fn solve_mixed(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    let mesh = &forms.mesh;
    let mut load = omega_load(mesh, &problem.f)?;
    let mut d = problem.d_set.clone();
    d.sort_unstable();
    d.dedup();
    if let Some(flux) = &problem.g_flux {
        let bg = complement_load(mesh, flux, &problem.g_weight)?;
        for i in 0..load.len() {
            if d.binary_search(&i).is_err() && mesh.tags[i] == NodeTag::Complement {
                load[i] += bg[i];
            }
        }
    }
    let g: Vec<f64> = mesh.nodes.iter().map(|&x| problem.g.eval(x)).collect();
    mixed_system(forms, &load, &d, &g)
}

/// Relative gap under which a Helmholtz parameter counts as an eigenvalue.
pub const RESONANCE_GAP: f64 = 1e-8;

fn resonant_cluster(spec: &Spectrum, lambda: f64) -> Vec<usize> {
    (0..spec.values.len())
        .filter(|&k| {
            let mu = spec.values[k];
            (lambda - mu).abs() <= RESONANCE_GAP * mu.abs().max(lambda.abs()).max(1.0)
        })
        .collect()
}

/// `(E - lambda M) u = load` in the Neumann space (closure of `Omega`,
/// complement condensed) or the Dirichlet space (interior unknowns, `g`
/// elsewhere). Within [`RESONANCE_GAP`] of a discrete eigenvalue the data
/// must be orthogonal to the eigenspace, and the solution `M`-orthogonal
/// to it is returned.
pub fn helmholtz_system(
    forms: &GalerkinForms,
    load: &[f64],
    lambda: f64,
    condition: HelmholtzCondition,
    g: &[f64],
    tol: f64,
) -> Result<Solution> {
    let mesh = &forms.mesh;
    let n = mesh.len();
    let mut a = forms.e.clone();
    forms.m.add_to_dense(&mut a, -lambda);
    let (spec, rows) = match condition {
        HelmholtzCondition::Neumann => (
            eig(forms, &Condition::Neumann, usize::MAX)?,
            mesh.omega_closure(),
        ),
        HelmholtzCondition::Dirichlet => (
            eig(forms, &Condition::Dirichlet, usize::MAX)?,
            mesh.indices(NodeTag::Interior),
        ),
    };
    let (a_red, red, cond, outer) = match condition {
        HelmholtzCondition::Neumann => {
            let cond = Condensed::new(&a, &rows, &mesh.complement())?;
            let red = cond.reduce_rhs(load)?;
            (cond.schur.clone(), red, Some(cond), Vec::new())
        }
        HelmholtzCondition::Dirichlet => {
            let outer = mesh.exterior_closure();
            let red = subvector(load, &rows)
                - submatrix(&a, &rows, &outer) * subvector(g, &outer);
            (submatrix(&a, &rows, &rows), red, None, outer)
        }
    };
    let modes: Vec<DVector<f64>> = spec
        .vectors
        .iter()
        .map(|v| subvector(&v.values, &rows))
        .collect();
    let cluster = resonant_cluster(&spec, lambda);
    let mut target = red.clone();
    let up = if cluster.is_empty() {
        solve_refined(&a_red, &red)?
    } else {
        let mut worst = (cluster[0], 0.0f64);
        for &k in &cluster {
            let p = modes[k].dot(&red).abs();
            if p >= worst.1 {
                worst = (k, p);
            }
        }
        if worst.1 > tol {
            return Err(NonlocalError::Resonance {
                index: worst.0,
                eigenvalue: spec.values[worst.0],
                projection: worst.1,
            });
        }
        let m_rows = forms.m.restrict(&rows);
        for &k in &cluster {
            let mk = DVector::from_vec(m_rows.mul_vec(modes[k].as_slice()));
            target -= mk * modes[k].dot(&red);
        }
        let mut up = DVector::zeros(rows.len());
        for (k, mode) in modes.iter().enumerate() {
            if !cluster.contains(&k) {
                up += mode * (mode.dot(&red) / (spec.values[k] - lambda));
            }
        }
        up
    };
    let residual = (&a_red * &up - &target).amax();
    let u = match &cond {
        Some(cond) => cond.expand(&up, load, n)?,
        None => {
            let mut u = vec![0.0; n];
            for &i in &outer {
                u[i] = g[i];
            }
            for (k, &i) in rows.iter().enumerate() {
                u[i] = up[k];
            }
            u
        }
    };
    Ok(Solution {
        u: DiscreteField::new(mesh.clone(), u)?,
        residual,
        compat_residual: None,
    })
}

pub fn solve_helmholtz(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    let mesh = &forms.mesh;
    let (load, norm, g) = match problem.helmholtz_condition {
        HelmholtzCondition::Neumann => {
            let (load, norm) = neumann_load(forms, problem)?;
            (load, norm, vec![0.0; mesh.len()])
        }
        HelmholtzCondition::Dirichlet => {
            let load = omega_load(mesh, &problem.f)?;
            let norm = l1(&omega_load(mesh, &abs_field(&problem.f))?);
            let g = mesh.nodes.iter().map(|&x| problem.g.eval(x)).collect();
            (load, norm, g)
        }
    };
    let tol = problem.compat_tol.unwrap_or(1e-10 * norm);
    helmholtz_system(forms, &load, problem.lambda, problem.helmholtz_condition, &g, tol)
}

/// Dispatch on the problem kind.
pub fn solve(forms: &GalerkinForms, problem: &ComplementProblem) -> Result<Solution> {
    match problem.kind {
        ProblemKind::Dirichlet => solve_dirichlet(forms, problem),
        ProblemKind::Neumann => solve_neumann(forms, problem),
        ProblemKind::Robin => solve_robin(forms, problem),
        ProblemKind::Mixed => solve_mixed(forms, problem),
        ProblemKind::Helmholtz => solve_helmholtz(forms, problem),
    }
}

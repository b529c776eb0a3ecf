//! Nonlocal-to-local harness: seminorm limits, collapsing cross energy,
//! limit coefficients and convergence of solutions and eigenpairs to a
//! P1 discretization of the local problem.
//!
//! The nonlocal form carries the factor 1/2 on the `Omega x Omega` part,
//! so a family whose second moment tends to `a` converges to the local
//! form with coefficient `a / 2`.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_forms, build_mesh, omega_load, DiscreteField, GalerkinForms, Mesh1D, TailMode,
};
use crate::constants::{bbm_constant, sphere_area};
use crate::error::{NonlocalError, Result};
use crate::field::ScalarField;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::{generalized_eigen, solve_refined, SymTridiag};
use crate::operator::{cross_polar, difference_quotient};
use crate::quadrature::{adaptive, integrate_gl_composite, integrate_weighted_at_zero, Tolerance};
use crate::solvers::{solve, ComplementProblem, ProblemKind};
use crate::spectral::{eig, Condition};

/// Default fractional grid.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [1.0, 1.2, 1.5, 1.8, 1.9, 1.95, 1.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    NonMonotoneConverging,
    Failed,
}

/// Measured values along a parameter grid against reference values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiment: String,
    /// Name of the swept parameter.
    pub parameter: String,
    pub grid: Vec<f64>,
    pub measured: Vec<f64>,
    pub reference: Vec<f64>,
    /// How the reference values were obtained.
    pub reference_provenance: String,
    /// Relative error, or absolute error where the reference is zero.
    pub rel_error: Vec<f64>,
    pub verdict: Verdict,
    /// Additional named columns.
    pub extra: Vec<(String, Vec<f64>)>,
    pub notes: Vec<String>,
}

impl SweepReport {
    fn new(
        experiment: &str,
        parameter: &str,
        grid: Vec<f64>,
        measured: Vec<f64>,
        reference: Vec<f64>,
        provenance: String,
    ) -> Result<Self> {
        let rel_error: Vec<f64> = measured
            .iter()
            .zip(&reference)
            .map(|(m, r)| if *r == 0.0 { m.abs() } else { ((m - r) / r).abs() })
            .collect();
        if measured.iter().chain(&rel_error).any(|v| !v.is_finite()) {
            return Err(NonlocalError::QuadratureNonConvergence(format!(
                "{experiment}: non-finite measurement"
            )));
        }
        let verdict = trend_verdict(&rel_error);
        Ok(Self {
            experiment: experiment.into(),
            parameter: parameter.into(),
            grid,
            measured,
            reference,
            reference_provenance: provenance,
            rel_error,
            verdict,
            extra: Vec::new(),
            notes: Vec::new(),
        })
    }

    /// CSV with columns `grid, measured, reference, rel_error` and the
    /// extra columns, `%.17g` numerics.
    pub fn to_csv(&self) -> String {
        use crate::linalg::format_g17 as g;
        let mut s = format!("{},measured,reference,rel_error", self.parameter);
        for (name, _) in &self.extra {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for i in 0..self.grid.len() {
            s.push_str(&format!(
                "{},{},{},{}",
                g(self.grid[i]),
                g(self.measured[i]),
                g(self.reference[i]),
                g(self.rel_error[i])
            ));
            for (_, col) in &self.extra {
                s.push(',');
                s.push_str(&g(col[i]));
            }
            s.push('\n');
        }
        s
    }
}

/// Errors ordered from the far end of the grid to the limit end.
pub fn trend_verdict(errors: &[f64]) -> Verdict {
    match errors {
        [] => Verdict::Failed,
        [_] => Verdict::Converging,
        _ => {
            let (first, last) = (errors[0], errors[errors.len() - 1]);
            if errors.windows(2).all(|w| w[1] <= w[0]) {
                Verdict::Converging
            } else if last < first {
                Verdict::NonMonotoneConverging
            } else {
                Verdict::Failed
            }
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(NonlocalError::Domain("empty parameter grid".into()));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) || grid.iter().any(|v| !v.is_finite()) {
        return Err(NonlocalError::Domain("grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Grid reordered so that the last point is nearest the local limit.
fn toward_limit(family: &KernelFamily, grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let mut g = grid.to_vec();
    let ascending = g.len() < 2 || g[1] > g[0];
    if ascending != family.increasing_is_local() {
        g.reverse();
    }
    Ok(g)
}

/// Distance of a family parameter from the local limit.
fn limit_distance(family: &KernelFamily, t: f64) -> f64 {
    if family.increasing_is_local() {
        2.0 - t
    } else {
        t
    }
}

/// P1 discretization of `-(a u')' ` on the closure of `Omega`.
#[derive(Debug, Clone)]
pub struct LocalOracle {
    pub mesh: Arc<Mesh1D>,
    pub coefficient: f64,
    /// Stiffness `int a u' v'` over the `Omega` nodes.
    pub stiffness: SymTridiag,
    pub mass: SymTridiag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalKind {
    Dirichlet,
    Neumann,
}

impl LocalOracle {
    pub fn new(mesh: Arc<Mesh1D>, coefficient: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(NonlocalError::Domain(format!(
                "coefficient {coefficient} must be positive"
            )));
        }
        let m = mesh.n_omega + 1;
        let h = mesh.h;
        let mut stiffness = SymTridiag::zeros(m);
        let mut mass = SymTridiag::zeros(m);
        for c in 0..mesh.n_omega {
            stiffness.add(c, c, coefficient / h);
            stiffness.add(c + 1, c + 1, coefficient / h);
            stiffness.add(c, c + 1, -coefficient / h);
            mass.add(c, c, h / 3.0);
            mass.add(c + 1, c + 1, h / 3.0);
            mass.add(c, c + 1, h / 6.0);
        }
        Ok(Self {
            mesh,
            coefficient,
            stiffness,
            mass,
        })
    }

    fn omega(&self) -> Vec<usize> {
        self.mesh.omega_closure()
    }

    fn lift(&self, local: &[f64]) -> Result<DiscreteField> {
        let mut u = vec![0.0; self.mesh.len()];
        for (k, &i) in self.omega().iter().enumerate() {
            u[i] = local[k];
        }
        DiscreteField::new(self.mesh.clone(), u)
    }

    /// Eigenpairs of the local problem, lifted to the full mesh (zero off
    /// `Omega`), `M`-orthonormal and sign-fixed.
    pub fn eig(&self, kind: LocalKind, k: usize) -> Result<(Vec<f64>, Vec<DiscreteField>)> {
        let m = self.stiffness.len();
        let idx: Vec<usize> = match kind {
            LocalKind::Dirichlet => (1..m - 1).collect(),
            LocalKind::Neumann => (0..m).collect(),
        };
        let a = self.stiffness.restrict(&idx).to_dense();
        let b = self.mass.restrict(&idx).to_dense();
        let (vals, vecs) = generalized_eigen(&a, &b)?;
        let take = k.min(vals.len());
        let mut out = Vec::with_capacity(take);
        for j in 0..take {
            let mut local = vec![0.0; m];
            for (r, &i) in idx.iter().enumerate() {
                local[i] = vecs[(r, j)];
            }
            out.push(self.lift(&local)?);
        }
        Ok((vals[..take].to_vec(), out))
    }
}

/// P1 solve of `-(a u')' = f`. Dirichlet data is `g(a)`, `g(b)`; Neumann
/// data is the outward flux `a du/dn` at `a` and `b`, and the mean-zero
/// solution is returned. Values off `Omega` are zero.
pub fn local_solve(
    oracle: &LocalOracle,
    kind: LocalKind,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<DiscreteField> {
    let mesh = &oracle.mesh;
    let omega = oracle.omega();
    let full = omega_load(mesh, f)?;
    let mut load: Vec<f64> = omega.iter().map(|&i| full[i]).collect();
    let m = load.len();
    let local = match kind {
        LocalKind::Dirichlet => {
            let (ga, gb) = (g.eval(mesh.a), g.eval(mesh.b));
            let inner: Vec<usize> = (1..m - 1).collect();
            let a = oracle.stiffness.restrict(&inner);
            let mut rhs: Vec<f64> = inner.iter().map(|&i| load[i]).collect();
            rhs[0] -= oracle.stiffness.get(1, 0) * ga;
            let last = rhs.len() - 1;
            rhs[last] -= oracle.stiffness.get(m - 2, m - 1) * gb;
            let ui = a.solve(&rhs)?;
            let mut u = vec![ga; m];
            u[m - 1] = gb;
            u[1..m - 1].copy_from_slice(&ui);
            u
        }
        LocalKind::Neumann => {
            load[0] += g.eval(mesh.a);
            load[m - 1] += g.eval(mesh.b);
            let total: f64 = load.iter().sum();
            let norm: f64 = load.iter().map(|v| v.abs()).sum();
            if total.abs() > 1e-10 * norm.max(1e-300) {
                return Err(NonlocalError::Incompatible {
                    residual: total.abs(),
                });
            }
            let ones = vec![1.0; m];
            let mvec = oracle.mass.mul_vec(&ones);
            let mut k = oracle.stiffness.to_dense().insert_row(m, 0.0).insert_column(m, 0.0);
            for i in 0..m {
                k[(i, m)] = mvec[i];
                k[(m, i)] = mvec[i];
            }
            let mut rhs = DVector::zeros(m + 1);
            rhs.rows_mut(0, m).copy_from_slice(&load);
            let sol = solve_refined(&k, &rhs)?;
            sol.rows(0, m).iter().copied().collect()
        }
    };
    oracle.lift(&local)
}

/// Second moment `int_{|h| < delta} h^2 nu(h) dh` along a grid and its
/// extrapolation to the local limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCoefficient {
    /// Extrapolated limit of the second moment.
    pub value: f64,
    /// Coefficient of the limiting local form, `value / 2`.
    pub local: f64,
    pub grid: Vec<f64>,
    pub moments: Vec<f64>,
}

/// `int_{-delta}^{delta} h^2 nu(h) dh`.
pub fn second_moment(kernel: &KernelSpec, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(NonlocalError::Domain(format!("delta {delta} must be positive")));
    }
    Ok(2.0 * kernel.integrate_moment(2.0, &|_| 1.0, 0.0, delta, &[])?)
}

/// Neville evaluation at zero of the interpolant through `(t_i, y_i)`.
fn extrapolate_to_zero(t: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = t.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (t[i + k] * p[i] - t[i] * p[i + 1]) / (t[i + k] - t[i]);
        }
    }
    p[0]
}

/// Limit of the second moment by polynomial (Richardson) extrapolation in
/// the distance to the local limit, using the three grid points nearest it.
pub fn limit_coefficient(family: &KernelFamily, delta: f64, grid: &[f64]) -> Result<LimitCoefficient> {
    let g = toward_limit(family, grid)?;
    let moments = g
        .par_iter()
        .map(|&t| second_moment(&family.member(t)?, delta))
        .collect::<Result<Vec<_>>>()?;
    let n = g.len();
    if n < 2 {
        return Err(NonlocalError::Extrapolation("need at least two grid points".into()));
    }
    let dist: Vec<f64> = g.iter().map(|&t| limit_distance(family, t)).collect();
    let lin = extrapolate_to_zero(&dist[n - 2..], &moments[n - 2..]);
    let value = if n >= 3 {
        let quad = extrapolate_to_zero(&dist[n - 3..], &moments[n - 3..]);
        if (quad - lin).abs() > 1e-2 * quad.abs().max(1e-12) {
            return Err(NonlocalError::Extrapolation(format!(
                "linear and quadratic estimates disagree: {lin} vs {quad}"
            )));
        }
        quad
    } else {
        lin
    };
    if !value.is_finite() {
        return Err(NonlocalError::Extrapolation("non-finite limit".into()));
    }
    Ok(LimitCoefficient {
        value,
        local: 0.5 * value,
        grid: g,
        moments,
    })
}

/// `(1 - s) int int_{Omega x Omega} |u(x) - u(y)|^p / |x - y|^{1 + s p}`,
/// with a Gauss–Jacobi rule in `r = |x - y|` absorbing `r^{p(1-s) - 1}`.
pub fn scaled_seminorm(omega: (f64, f64), u: &ScalarField, p: f64, s: f64) -> Result<f64> {
    let (a, b) = omega;
    if !(b > a) {
        return Err(NonlocalError::DegenerateInterval { a, b });
    }
    if !(s > 0.0 && s < 1.0) || !(p >= 1.0) {
        return Err(NonlocalError::Domain(format!("need 0 < s < 1 and p >= 1 (s = {s}, p = {p})")));
    }
    let l = b - a;
    let mut kinks: Vec<f64> = u.kinks().into_iter().filter(|k| *k > a && *k < b).collect();
    kinks.sort_by(f64::total_cmp);
    let inner = |r: f64| -> f64 {
        let hi = b - r;
        if hi <= a {
            return 0.0;
        }
        let q = |x: f64| difference_quotient(u, x, r).abs().powf(p);
        let mut cuts = vec![a];
        for &k in &kinks {
            for c in [k - r, k] {
                if c > a && c < hi {
                    cuts.push(c);
                }
            }
        }
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2).map(|w| integrate_gl_composite(q, w[0], w[1], 24, 4)).sum()
    };
    let gamma = p * (1.0 - s) - 1.0;
    Ok((1.0 - s) * 2.0 * integrate_weighted_at_zero(inner, l, gamma, 48))
}

/// BBM sweep against `(|S^0| / p) K_{1,p} int |u'|^p`.
pub fn bbm_sweep(omega: (f64, f64), u: &ScalarField, p: f64, s_grid: &[f64]) -> Result<SweepReport> {
    check_grid(s_grid)?;
    let mut grid = s_grid.to_vec();
    if grid.len() > 1 && grid[1] < grid[0] {
        grid.reverse();
    }
    let (a, b) = omega;
    let factor = sphere_area(1)? / p * bbm_constant(1, p)?;
    let grad = if u.as_constant().is_some() {
        0.0
    } else {
        if !u.has_derivatives() {
            return Err(NonlocalError::Regularity("u must carry its derivative".into()));
        }
        integrate_gl_composite(|x| u.jet(x).d1.abs().powf(p), a, b, 24, 16)
    };
    let limit = factor * grad;
    let measured = grid
        .par_iter()
        .map(|&s| scaled_seminorm(omega, u, p, s))
        .collect::<Result<Vec<_>>>()?;
    let n = grid.len();
    SweepReport::new(
        "bbm",
        "s",
        grid,
        measured,
        vec![limit; n],
        format!("(|S^0|/p) K_(1,p) int |u'|^p = {factor} * {grad}"),
    )
}

/// `int int_{Omega x (T \ Omega)} (u(x) - u(y))^2 nu` plus the pairs
/// beyond `T`, which are evaluated with `u(y)` taken as zero there.
pub fn cross_energy(kernel: &KernelSpec, omega: (f64, f64), u: &ScalarField, collar: f64) -> Result<f64> {
    let (a, b) = omega;
    if !(b > a) {
        return Err(NonlocalError::DegenerateInterval { a, b });
    }
    if u.as_constant().is_some() {
        return Ok(0.0);
    }
    let mut edges = u.kinks();
    if let Some((lo, hi)) = u.support_hull() {
        edges.extend([lo, hi]);
    }
    let g = |x: f64, y: f64, r: f64| {
        let d = difference_quotient(u, x.min(y), r);
        d * d
    };
    let near = cross_polar(kernel, omega, collar, 3.0, &edges, &g)?;
    let (t_lo, t_hi) = (a - collar, b + collar);
    let inside: Vec<f64> = edges.iter().copied().filter(|e| *e > a && *e < b).collect();
    let far = adaptive(
        |x| {
            let v = u.eval(x);
            match (kernel.tail(x - t_lo), kernel.tail(t_hi - x)) {
                (Ok(l), Ok(r)) => v * v * (l + r),
                _ => f64::NAN,
            }
        },
        a,
        b,
        &inside,
        Tolerance::default(),
    )?;
    if !far.is_finite() {
        return Err(NonlocalError::QuadratureNonConvergence("tail of the cross energy".into()));
    }
    Ok(near + far)
}

/// Cross-boundary energy along a family grid; converges to zero.
pub fn collapse_check(
    omega: (f64, f64),
    u: &ScalarField,
    family: &KernelFamily,
    grid: &[f64],
    collar: f64,
) -> Result<SweepReport> {
    let g = toward_limit(family, grid)?;
    let measured = g
        .par_iter()
        .map(|&t| cross_energy(&family.member(t)?, omega, u, collar))
        .collect::<Result<Vec<_>>>()?;
    let n = g.len();
    SweepReport::new(
        "collapse",
        if family.increasing_is_local() { "alpha" } else { "eps" },
        g,
        measured,
        vec![0.0; n],
        "limit of the cross-boundary energy is zero".into(),
    )
}

/// Discretization used by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMesh {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub collar: f64,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
}

fn default_quad() -> usize {
    4
}

impl SweepMesh {
    pub fn build(&self) -> Result<Arc<Mesh1D>> {
        Ok(Arc::new(build_mesh(self.a, self.b, self.n, self.collar)?))
    }

    fn forms(&self, mesh: &Arc<Mesh1D>, kernel: &KernelSpec, tail: TailMode) -> Result<GalerkinForms> {
        assemble_forms(mesh.clone(), kernel, self.quad_order, tail)
    }
}

/// Limit coefficient of the local form for a family, using the three
/// grid points nearest the limit (or a fixed near-limit grid for
/// fractional families).
fn oracle_coefficient(family: &KernelFamily, grid: &[f64]) -> Result<LimitCoefficient> {
    match family {
        KernelFamily::Fractional { .. } => limit_coefficient(family, 1.0, &[1.9, 1.95, 1.99]),
        _ => {
            let g = toward_limit(family, grid)?;
            let tail = &g[g.len().saturating_sub(3)..];
            let mut t = tail.to_vec();
            if t.len() > 1 && t[1] < t[0] {
                t.reverse();
            }
            limit_coefficient(family, 1.0, &t)
        }
    }
}

/// `mu_1(t)` per grid point against the local Neumann `mu_1`.
pub fn sharp_constant_sweep(
    family: &KernelFamily,
    grid: &[f64],
    mesh: &SweepMesh,
) -> Result<SweepReport> {
    let g = toward_limit(family, grid)?;
    let m = mesh.build()?;
    let coef = oracle_coefficient(family, &g)?;
    let oracle = LocalOracle::new(m.clone(), coef.local)?;
    let mu_local = oracle.eig(LocalKind::Neumann, 2)?.0[1];
    let measured = g
        .par_iter()
        .map(|&t| {
            let f = mesh.forms(&m, &family.member(t)?, TailMode::Drop)?;
            Ok(eig(&f, &Condition::Neumann, 2)?.values[1])
        })
        .collect::<Result<Vec<_>>>()?;
    let n = g.len();
    let inverse: Vec<f64> = measured.iter().map(|v| 1.0 / v).collect();
    let finest = inverse[n - 1];
    let bound = inverse.iter().fold(0.0f64, |a, v| a.max(*v));
    let mut report = SweepReport::new(
        "poincare",
        if family.increasing_is_local() { "alpha" } else { "eps" },
        g,
        measured,
        vec![mu_local; n],
        format!(
            "local P1 Neumann mu_1 with coefficient {} = (extrapolated second moment {}) / 2",
            coef.local, coef.value
        ),
    )?;
    report.extra.push(("poincare_constant".into(), inverse));
    report.notes.push(format!(
        "max 1/mu_1 over the grid = {bound}; 2 x value at the limit end = {}",
        2.0 * finest
    ));
    Ok(report)
}

/// Whether `max 1/mu_1` over a sharp-constant report stays within twice
/// its value at the limit end.
pub fn poincare_uniformly_bounded(report: &SweepReport) -> Option<bool> {
    let (_, inv) = report.extra.iter().find(|(n, _)| n == "poincare_constant")?;
    let finest = *inv.last()?;
    Some(inv.iter().all(|v| *v <= 2.0 * finest))
}

/// A stationary problem for the solution sweep.
#[derive(Debug, Clone)]
pub enum SweepProblem {
    /// `L u = f` on `Omega`, `u = g` on the complement.
    Dirichlet { f: ScalarField, g: ScalarField },
    /// `L u = f`, zero flux, mean-zero solution.
    Neumann { f: ScalarField },
}

/// `||u_t - u_local||_{L2(Omega)}` per grid point. The verdict is
/// `Converging` when the error at the limit end is below a third of the
/// error at the far end.
pub fn solution_convergence(
    problem: &SweepProblem,
    family: &KernelFamily,
    grid: &[f64],
    mesh: &SweepMesh,
) -> Result<SweepReport> {
    let g = toward_limit(family, grid)?;
    let m = mesh.build()?;
    let coef = oracle_coefficient(family, &g)?;
    let oracle = LocalOracle::new(m.clone(), coef.local)?;
    let zero = crate::field::FunctionSpec::Constant { value: 0.0 }.build()?;
    let (local, tail, cp) = match problem {
        SweepProblem::Dirichlet { f, g } => (
            local_solve(&oracle, LocalKind::Dirichlet, f, g)?,
            TailMode::DirichletConst,
            ComplementProblem::new(ProblemKind::Dirichlet, f.clone(), g.clone()),
        ),
        SweepProblem::Neumann { f } => (
            local_solve(&oracle, LocalKind::Neumann, f, &zero)?,
            TailMode::Drop,
            ComplementProblem::new(ProblemKind::Neumann, f.clone(), zero.clone()),
        ),
    };
    let measured = g
        .par_iter()
        .map(|&t| {
            let forms = mesh.forms(&m, &family.member(t)?, tail)?;
            let u = solve(&forms, &cp)?.u;
            let d: Vec<f64> = u.values.iter().zip(&local.values).map(|(a, b)| a - b).collect();
            Ok(forms.m.quad_form(&d, &d).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = g.len();
    let mut report = SweepReport::new(
        "solution",
        if family.increasing_is_local() { "alpha" } else { "eps" },
        g,
        measured.clone(),
        vec![0.0; n],
        format!(
            "L2(Omega) distance to the local P1 solution with coefficient {} = (extrapolated second moment {}) / 2",
            coef.local, coef.value
        ),
    )?;
    report.verdict = if measured[n - 1] < measured[0] / 3.0 || measured[0] == 0.0 && measured[n - 1] == 0.0 {
        Verdict::Converging
    } else {
        Verdict::Failed
    };
    Ok(report)
}

/// Per index `0..k`: eigenvalue error against the local P1 spectrum and
/// eigenvector alignment `|<phi_t, phi_local>_M|` in the extra column.
pub fn eigen_convergence(
    condition: LocalKind,
    family: &KernelFamily,
    grid: &[f64],
    k: usize,
    mesh: &SweepMesh,
) -> Result<Vec<SweepReport>> {
    let g = toward_limit(family, grid)?;
    let m = mesh.build()?;
    let coef = oracle_coefficient(family, &g)?;
    let oracle = LocalOracle::new(m.clone(), coef.local)?;
    let (loc_vals, loc_vecs) = oracle.eig(condition, k)?;
    let per_point = g
        .par_iter()
        .map(|&t| {
            let kernel = family.member(t)?;
            let (tail, cond) = match condition {
                LocalKind::Dirichlet => (TailMode::DirichletZero, Condition::Dirichlet),
                LocalKind::Neumann => (TailMode::Drop, Condition::Neumann),
            };
            let forms = mesh.forms(&m, &kernel, tail)?;
            let spec = eig(&forms, &cond, k)?;
            let align: Vec<f64> = spec
                .vectors
                .iter()
                .zip(&loc_vecs)
                .map(|(v, w)| v.omega_dot(w, &forms.m).abs())
                .collect();
            Ok((spec.values, align))
        })
        .collect::<Result<Vec<_>>>()?;
    let param = if family.increasing_is_local() { "alpha" } else { "eps" };
    let mut out = Vec::new();
    for idx in 0..loc_vals.len() {
        let measured: Vec<f64> = per_point.iter().map(|(v, _)| v[idx]).collect();
        let align: Vec<f64> = per_point.iter().map(|(_, a)| a[idx]).collect();
        let mut r = SweepReport::new(
            &format!("eigs_{idx}"),
            param,
            g.clone(),
            measured,
            vec![loc_vals[idx]; g.len()],
            format!(
                "local P1 eigenvalue {idx} with coefficient {} = (extrapolated second moment {}) / 2",
                coef.local, coef.value
            ),
        )?;
        r.extra.push(("alignment".into(), align));
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::NodeTag;
    use crate::field::FunctionSpec;
    use crate::kernels::Normalization;
    use std::f64::consts::PI;

    fn konst(v: f64) -> ScalarField {
        FunctionSpec::Constant { value: v }.build().unwrap()
    }

    fn frac(nz: Normalization, factor: f64) -> KernelFamily {
        KernelFamily::Fractional { normalization: nz, factor }
    }

    #[test]
    fn local_oracle_classics() {
        let mesh = Arc::new(build_mesh(0.0, 1.0, 64, 0.25).unwrap());
        let o = LocalOracle::new(mesh.clone(), 1.0).unwrap();
        let f = FunctionSpec::Sin { freq: PI, amp: PI * PI, phase: 0.0 }.build().unwrap();
        let u = local_solve(&o, LocalKind::Dirichlet, &f, &konst(0.0)).unwrap();
        let d: Vec<f64> = u.values.iter().zip(&mesh.nodes)
            .enumerate()
            .map(|(i, (v, x))| if mesh.tags[i] == NodeTag::Complement { 0.0 } else { v - (PI * x).sin() })
            .collect();
        assert!(o.mass.len() == 65 && crate::assembly::mass_matrix(&mesh).quad_form(&d, &d).sqrt() < 1e-3);

        let (vals, _) = o.eig(LocalKind::Neumann, 3).unwrap();
        assert!(vals[0].abs() < 1e-10);
        assert!((vals[1] / (PI * PI) - 1.0).abs() < 1e-3);
        assert!((vals[2] / (4.0 * PI * PI) - 1.0).abs() < 4e-3);
        let o2 = LocalOracle::new(mesh, 2.0).unwrap();
        let (v2, _) = o2.eig(LocalKind::Neumann, 3).unwrap();
        assert!((v2[2] / vals[2] - 2.0).abs() < 1e-10);
        assert!(matches!(
            local_solve(&o, LocalKind::Neumann, &konst(1.0), &konst(0.0)),
            Err(NonlocalError::Incompatible { .. })
        ));
    }

    #[test]
    fn limit_coefficients() {
        let grid = [1.9, 1.95, 1.99];
        let a = limit_coefficient(&frac(Normalization::StableA, 1.0), 1.0, &grid).unwrap();
        assert!((a.value - 1.0).abs() < 1e-4);
        let h = limit_coefficient(&frac(Normalization::HalfC, 1.0), 1.0, &grid).unwrap();
        assert!((h.value - 1.0).abs() < 1e-4);
        let c = limit_coefficient(&frac(Normalization::ExactC, 1.0), 1.0, &grid).unwrap();
        assert!((c.value - 2.0).abs() < 1e-4);
        assert!((c.local - 1.0).abs() < 1e-4);
        let c2 = limit_coefficient(&frac(Normalization::ExactC, 2.0), 1.0, &grid).unwrap();
        assert!((c2.value / c.value - 2.0).abs() < 1e-12);
        assert!(limit_coefficient(&frac(Normalization::ExactC, 1.0), 1.0, &[1.99]).is_err());
    }

    #[test]
    fn bbm_closed_form_and_constants() {
        let x = FunctionSpec::Monomial { power: 1, coef: 1.0 }.build().unwrap();
        let r = bbm_sweep((0.0, 1.0), &x, 2.0, &[0.3, 0.7, 0.99]).unwrap();
        for (s, m) in r.grid.iter().zip(&r.measured) {
            assert!((m - 1.0 / (3.0 - 2.0 * s)).abs() < 1e-12);
        }
        assert_eq!(r.verdict, Verdict::Converging);
        let c = bbm_sweep((0.0, 1.0), &konst(3.0), 2.0, &[0.5, 0.9]).unwrap();
        assert!(c.measured.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn collapse_trends() {
        let w = KernelFamily::Window { beta: 0.0, p: 2.0 };
        assert!(collapse_check((0.0, 1.0), &konst(1.0), &w, &[0.2, 0.1], 0.5)
            .unwrap()
            .measured
            .iter()
            .all(|v| *v == 0.0));
        let x = FunctionSpec::Monomial { power: 1, coef: 1.0 }.build().unwrap();
        let r = collapse_check((0.0, 1.0), &x, &w, &[0.2, 0.1, 0.05], 0.5).unwrap();
        // u' = 1 at both ends: eps (1 + beta) / (2 (2 + beta)) per end
        for (e, m) in r.grid.iter().zip(&r.measured) {
            assert!((m - 0.5 * e).abs() < 1e-10, "{e} {m}");
        }
        assert_eq!(r.verdict, Verdict::Converging);
    }

    #[test]
    fn verdicts_and_grids() {
        assert_eq!(trend_verdict(&[3.0, 2.0, 1.0]), Verdict::Converging);
        assert_eq!(trend_verdict(&[3.0, 4.0, 1.0]), Verdict::NonMonotoneConverging);
        assert_eq!(trend_verdict(&[1.0, 2.0]), Verdict::Failed);
        assert!(check_grid(&[1.0, 1.0]).is_err());
        let m = SweepMesh { a: 0.0, b: 1.0, n: 16, collar: 0.25, quad_order: 4 };
        let r = sharp_constant_sweep(&frac(Normalization::ExactC, 1.0), &[1.5], &m).unwrap();
        assert_eq!(r.grid, vec![1.5]);
        assert_eq!(r.measured.len(), 1);
    }
}

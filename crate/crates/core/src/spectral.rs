//! Eigenpairs of the discrete operator under Neumann, Dirichlet and Robin
//! complement conditions, the discrete Dirichlet-to-Neumann map and
//! spectral evolutions.
//!
//! Complement nodes carry no `L2(Omega)` mass, so for Neumann and Robin
//! spectra they are condensed out and the pencil is posed on the closure
//! of `Omega`. Eigenvectors are returned on the full mesh.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{complement_mass, ComplementWeight, DiscreteField, GalerkinForms, NodeTag, TailMode};
use crate::error::{NonlocalError, Result};
use crate::field::ScalarField;
use crate::kernels::{WeightKind, WeightSpec};
use crate::linalg::{fix_sign, generalized_eigen, submatrix, Condensed, SymTridiag};
use crate::solvers::robin_mass;

/// Complement condition of an eigenproblem.
#[derive(Debug, Clone)]
pub enum Condition {
    Neumann,
    Dirichlet,
    /// Robin term `beta * nu_K`; `k` defaults to `Omega`.
    Robin {
        beta: ScalarField,
        k: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Neumann,
    Dirichlet,
    Robin,
}

impl Condition {
    pub fn kind(&self) -> ConditionKind {
        match self {
            Condition::Neumann => ConditionKind::Neumann,
            Condition::Dirichlet => ConditionKind::Dirichlet,
            Condition::Robin { .. } => ConditionKind::Robin,
        }
    }
}

/// Ordered eigenpairs, `M`-orthonormal on `Omega`.
///
/// Values are indexed from zero under every condition: `values[0]` is
/// `mu_0 = 0` for Neumann and the first Dirichlet eigenvalue otherwise.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub condition: ConditionKind,
    pub values: Vec<f64>,
    pub vectors: Vec<DiscreteField>,
    /// Nodes on which the pencil was posed.
    pub unknowns: Vec<usize>,
    /// Size of the full discrete spectrum.
    pub dimension: usize,
    /// Robin mass added to `E`, if any.
    pub robin_term: Option<SymTridiag>,
    pub mass_normalized: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.values.len() < self.dimension
    }

    /// Coefficients `(u, phi_k)_M`.
    pub fn coefficients(&self, forms: &GalerkinForms, u: &[f64]) -> Vec<f64> {
        let mu = forms.m.mul_vec(u);
        self.vectors
            .iter()
            .map(|v| v.values.iter().zip(&mu).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `sum_k c_k phi_k`.
    pub fn synthesize(&self, coef: &[f64]) -> Vec<f64> {
        let n = self.vectors.first().map_or(0, |v| v.values.len());
        let mut out = vec![0.0; n];
        for (c, v) in coef.iter().zip(&self.vectors) {
            for (o, x) in out.iter_mut().zip(&v.values) {
                *o += c * x;
            }
        }
        out
    }
}

/// `E`, plus the Robin term when the spectrum carries one.
pub fn form_matrix(forms: &GalerkinForms, spectrum: &Spectrum) -> DMatrix<f64> {
    let mut a = forms.e.clone();
    if let Some(r) = &spectrum.robin_term {
        r.add_to_dense(&mut a, 1.0);
    }
    a
}

/// First `k` eigenpairs (all when `k` exceeds the dimension).
pub fn eig(forms: &GalerkinForms, condition: &Condition, k: usize) -> Result<Spectrum> {
    let mesh = &forms.mesh;
    let n = mesh.len();
    let mut a = forms.e.clone();
    let robin_term = match condition {
        Condition::Robin { beta, k } => {
            let mc = robin_mass(forms, beta, *k)?;
            mc.add_to_dense(&mut a, 1.0);
            Some(mc)
        }
        Condition::Neumann => {
            if forms.tail_mode != TailMode::Drop {
                return Err(NonlocalError::Domain(
                    "Neumann spectra need tail_mode = drop".into(),
                ));
            }
            None
        }
        Condition::Dirichlet => None,
    };
    let mass = forms.m.to_dense();
    let (unknowns, values, vecs) = match condition {
        Condition::Dirichlet => {
            let inner = mesh.indices(NodeTag::Interior);
            let (vals, v) =
                generalized_eigen(&submatrix(&a, &inner, &inner), &submatrix(&mass, &inner, &inner))?;
            let take = k.min(vals.len());
            let vecs: Vec<Vec<f64>> = (0..take)
                .map(|j| {
                    let mut u = vec![0.0; n];
                    for (r, &i) in inner.iter().enumerate() {
                        u[i] = v[(r, j)];
                    }
                    u
                })
                .collect();
            (inner, vals, vecs)
        }
        _ => {
            let p = mesh.omega_closure();
            let cond = Condensed::new(&a, &p, &mesh.complement())?;
            let (vals, v) = generalized_eigen(&cond.schur, &submatrix(&mass, &p, &p))?;
            let take = k.min(vals.len());
            let zero = vec![0.0; n];
            let vecs = (0..take)
                .map(|j| cond.expand(&v.column(j).clone_owned(), &zero, n))
                .collect::<Result<Vec<_>>>()?;
            (p, vals, vecs)
        }
    };
    let dimension = values.len();
    let take = k.min(dimension);
    let vectors = vecs
        .into_iter()
        .map(|mut u| {
            fix_sign(&mut u);
            DiscreteField::new(mesh.clone(), u)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        condition: condition.kind(),
        values: values[..take].to_vec(),
        vectors,
        unknowns,
        dimension,
        robin_term,
        mass_normalized: true,
    })
}

fn equation_rows(forms: &GalerkinForms, spectrum: &Spectrum) -> Vec<usize> {
    match spectrum.condition {
        ConditionKind::Dirichlet => spectrum.unknowns.clone(),
        _ => (0..forms.n()).collect(),
    }
}

/// Residual of one candidate pair: the larger of `|value - q(v)|` with `q`
/// the Rayleigh quotient and `||A v - value M v||_2` over the equation rows.
pub fn pair_residual(forms: &GalerkinForms, spectrum: &Spectrum, value: f64, v: &[f64]) -> f64 {
    let a = form_matrix(forms, spectrum);
    pair_residual_with(&a, forms, &equation_rows(forms, spectrum), value, v)
}

fn pair_residual_with(
    a: &DMatrix<f64>,
    forms: &GalerkinForms,
    rows: &[usize],
    value: f64,
    v: &[f64],
) -> f64 {
    let x = DVector::from_column_slice(v);
    let av = a * &x;
    let mv = forms.m.mul_vec(v);
    let num = x.dot(&av);
    let den: f64 = v.iter().zip(&mv).map(|(p, q)| p * q).sum();
    let quotient = (value - num / den).abs();
    let r = rows
        .iter()
        .map(|&i| (av[i] - value * mv[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    quotient.max(r)
}

/// Max over the stored pairs of [`pair_residual`].
pub fn rayleigh_residual(forms: &GalerkinForms, spectrum: &Spectrum) -> f64 {
    let a = form_matrix(forms, spectrum);
    let rows = equation_rows(forms, spectrum);
    spectrum
        .values
        .iter()
        .zip(&spectrum.vectors)
        .map(|(&mu, v)| pair_residual_with(&a, forms, &rows, mu, &v.values))
        .fold(0.0, f64::max)
}

/// `max |v_i^T M v_j - delta_ij|`.
pub fn orthonormality_defect(forms: &GalerkinForms, spectrum: &Spectrum) -> f64 {
    let mv: Vec<Vec<f64>> = spectrum
        .vectors
        .iter()
        .map(|v| forms.m.mul_vec(&v.values))
        .collect();
    let mut worst: f64 = 0.0;
    for (i, vi) in spectrum.vectors.iter().enumerate() {
        for (j, mj) in mv.iter().enumerate() {
            let d: f64 = vi.values.iter().zip(mj).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoincareMode {
    NeumannMeanZero,
    DirichletFriedrichs,
}

/// `1 / mu_1` on the mean-zero space or `1 / lambda_1` for the Friedrichs
/// inequality.
pub fn poincare_constant(forms: &GalerkinForms, mode: PoincareMode) -> Result<f64> {
    let v = match mode {
        PoincareMode::NeumannMeanZero => eig(forms, &Condition::Neumann, 2)?.values[1],
        PoincareMode::DirichletFriedrichs => eig(forms, &Condition::Dirichlet, 1)?.values[0],
    };
    if !(v > 0.0) {
        return Err(NonlocalError::Eigen(format!(
            "first nonzero eigenvalue is not positive: {v}"
        )));
    }
    Ok(1.0 / v)
}

/// Discrete Dirichlet-to-Neumann map on the complement and boundary nodes.
#[derive(Debug, Clone)]
pub struct DtNMap {
    pub lambda: f64,
    /// Trace nodes (complement and boundary), in mesh order.
    pub nodes: Vec<usize>,
    pub matrix: DMatrix<f64>,
    /// `-A_II^{-1} A_Ic`: interior values of the extension of a trace.
    extension: DMatrix<f64>,
    interior: Vec<usize>,
    n: usize,
}

/// Relative gap under which `lambda` counts as a Dirichlet eigenvalue.
pub const DTN_RESONANCE_GAP: f64 = 1e-8;

/// `D = A_cc - A_cI A_II^{-1} A_Ic` with `A = E - lambda M`.
pub fn dtn_matrix(forms: &GalerkinForms, lambda: f64) -> Result<DtNMap> {
    let mesh = &forms.mesh;
    let dir = eig(forms, &Condition::Dirichlet, usize::MAX)?;
    for (k, &mu) in dir.values.iter().enumerate() {
        if (lambda - mu).abs() <= DTN_RESONANCE_GAP * mu.abs().max(lambda.abs()).max(1.0) {
            return Err(NonlocalError::Resonance {
                index: k,
                eigenvalue: mu,
                projection: f64::NAN,
            });
        }
    }
    let mut a = forms.e.clone();
    forms.m.add_to_dense(&mut a, -lambda);
    let inner = mesh.indices(NodeTag::Interior);
    let outer = mesh.exterior_closure();
    let a_ii = submatrix(&a, &inner, &inner);
    let a_ic = submatrix(&a, &inner, &outer);
    let lu = a_ii.lu();
    let sol = lu
        .solve(&a_ic)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| NonlocalError::SingularSystem("interior block is singular".into()))?;
    let matrix = submatrix(&a, &outer, &outer) - a_ic.transpose() * &sol;
    Ok(DtNMap {
        lambda,
        nodes: outer,
        matrix,
        extension: -sol,
        interior: inner,
        n: mesh.len(),
    })
}

/// One pair of the Robin link: `-D g = beta Mc g` and the residual of the
/// Robin eigen-equation at `lambda` for the extension of `g`.
#[derive(Debug, Clone)]
pub struct RobinLink {
    pub beta: f64,
    pub extension: Vec<f64>,
    /// `||(E + beta Mc - lambda M) u_g||_2`.
    pub residual: f64,
    /// `max |E_ij| * max |u_g|`.
    pub scale: f64,
}

impl DtNMap {
    /// `||D - D^T||_F / ||D||_F`.
    pub fn symmetry_defect(&self) -> f64 {
        let norm = self.matrix.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.transpose()).norm() / norm
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.nodes.len() {
            return Err(NonlocalError::MeshMismatch);
        }
        Ok((&self.matrix * DVector::from_column_slice(g)).iter().copied().collect())
    }

    /// Full-mesh `lambda`-harmonic extension of a trace.
    pub fn extend(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.nodes.len() {
            return Err(NonlocalError::MeshMismatch);
        }
        let ui = &self.extension * DVector::from_column_slice(g);
        let mut u = vec![0.0; self.n];
        for (k, &i) in self.nodes.iter().enumerate() {
            u[i] = g[k];
        }
        for (k, &i) in self.interior.iter().enumerate() {
            u[i] = ui[k];
        }
        Ok(u)
    }

    /// Smallest `count` eigenvalues of the pencil `(-D, Mc)` with
    /// `Mc = int_{T \ Omega} nu_K phi_i phi_j`, and the Robin residual of
    /// each extension. Trace nodes with no Robin mass are pinned to zero.
    pub fn robin_link(
        &self,
        forms: &GalerkinForms,
        k: Option<(f64, f64)>,
        count: usize,
    ) -> Result<Vec<RobinLink>> {
        let k = k.unwrap_or((forms.mesh.a, forms.mesh.b));
        let w = WeightSpec::new(forms.kernel.clone(), k, WeightKind::Essinf)?;
        let mc = complement_mass(&forms.mesh, &ComplementWeight::Weight(w))?;
        let mc_dense = mc.to_dense();
        let top = mc.diag.iter().fold(0.0f64, |m, x| m.max(*x));
        let active: Vec<usize> = (0..self.nodes.len())
            .filter(|&r| mc.diag[self.nodes[r]] > 1e-14 * top)
            .collect();
        if active.is_empty() {
            return Err(NonlocalError::RobinPrecondition);
        }
        let d = DMatrix::from_fn(active.len(), active.len(), |i, j| {
            -0.5 * (self.matrix[(active[i], active[j])] + self.matrix[(active[j], active[i])])
        });
        let act_nodes: Vec<usize> = active.iter().map(|&r| self.nodes[r]).collect();
        let b = submatrix(&mc_dense, &act_nodes, &act_nodes);
        let (vals, vecs) = generalized_eigen(&d, &b)?;
        let mut a = forms.e.clone();
        forms.m.add_to_dense(&mut a, -self.lambda);
        let escale = forms.e_scale();
        let mut out = Vec::new();
        for j in 0..count.min(vals.len()) {
            let mut g = vec![0.0; self.nodes.len()];
            for (r, &i) in active.iter().enumerate() {
                g[i] = vecs[(r, j)];
            }
            let u = self.extend(&g)?;
            let x = DVector::from_column_slice(&u);
            let mut r = &a * &x;
            let mcu = mc.mul_vec(&u);
            for i in 0..r.len() {
                r[i] += vals[j] * mcu[i];
            }
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.push(RobinLink {
                beta: vals[j],
                extension: u,
                residual: r.norm(),
                scale: escale * umax,
            });
        }
        Ok(out)
    }
}

/// Piecewise-constant-in-time load: `loads[j]` acts on
/// `[starts[j], starts[j + 1])`, the last one indefinitely.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub starts: Vec<f64>,
    pub loads: Vec<Vec<f64>>,
}

impl Forcing {
    pub fn constant(load: Vec<f64>) -> Self {
        Self {
            starts: vec![0.0],
            loads: vec![load],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.starts.len() != self.loads.len()
            || self.starts.windows(2).any(|w| !(w[1] > w[0]))
            || self.loads.iter().any(|l| l.len() != n)
        {
            return Err(NonlocalError::Domain("malformed forcing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteField>,
    /// Set when the spectrum does not span the discrete space.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct ComplexTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex<f64>>>,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct WaveTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteField>,
    pub velocities: Vec<DiscreteField>,
    pub truncated: bool,
}

/// `samples` equally spaced times from 0 to `t_end` inclusive.
pub fn sample_times(t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(NonlocalError::Domain(
            "need t_end > 0 and at least two samples".into(),
        ));
    }
    Ok((0..samples)
        .map(|j| t_end * j as f64 / (samples - 1) as f64)
        .collect())
}

fn check_u(forms: &GalerkinForms, spectrum: &Spectrum, u: &DiscreteField) -> Result<()> {
    forms.check_field(u)?;
    if spectrum.vectors.first().is_some_and(|v| v.values.len() != u.values.len()) {
        return Err(NonlocalError::MeshMismatch);
    }
    Ok(())
}

/// `int_0^d exp(-mu tau) d tau`.
fn phi1(mu: f64, d: f64) -> f64 {
    if (mu * d).abs() < 1e-14 {
        d
    } else {
        -(-mu * d).exp_m1() / mu
    }
}

fn zero_tolerance(spectrum: &Spectrum) -> f64 {
    1e-10 * spectrum.values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// `u(t) = sum_k [(u0, phi_k) e^{-mu_k t} + Duhamel_k(t)] phi_k` with the
/// Duhamel term integrated exactly for piecewise-constant loads.
pub fn evolve_heat(
    forms: &GalerkinForms,
    spectrum: &Spectrum,
    u0: &DiscreteField,
    forcing: Option<&Forcing>,
    t_end: f64,
    samples: usize,
) -> Result<Trajectory> {
    check_u(forms, spectrum, u0)?;
    if let Some(f) = forcing {
        f.check(u0.values.len())?;
    }
    let times = sample_times(t_end, samples)?;
    let c = spectrum.coefficients(forms, &u0.values);
    let fk: Vec<Vec<f64>> = forcing.map_or(Vec::new(), |f| {
        f.loads
            .iter()
            .map(|l| {
                spectrum
                    .vectors
                    .iter()
                    .map(|v| v.values.iter().zip(l).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    });
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let coef: Vec<f64> = (0..c.len())
            .map(|k| {
                let mu = spectrum.values[k];
                let mut a = (-mu * t).exp() * c[k];
                if let Some(f) = forcing {
                    for (j, fj) in fk.iter().enumerate() {
                        let s = f.starts[j].max(0.0);
                        let e = f.starts.get(j + 1).copied().unwrap_or(f64::INFINITY).min(t);
                        if e > s {
                            a += fj[k] * (-mu * (t - e)).exp() * phi1(mu, e - s);
                        }
                    }
                }
                a
            })
            .collect();
        states.push(DiscreteField::new(u0.mesh.clone(), spectrum.synthesize(&coef))?);
    }
    Ok(Trajectory {
        times,
        states,
        truncated: spectrum.is_truncated(),
    })
}

/// `u(t) = sum_k (u0, phi_k) e^{i mu_k t} phi_k`.
pub fn evolve_schrodinger(
    forms: &GalerkinForms,
    spectrum: &Spectrum,
    u0: &DiscreteField,
    t_end: f64,
    samples: usize,
) -> Result<ComplexTrajectory> {
    check_u(forms, spectrum, u0)?;
    let times = sample_times(t_end, samples)?;
    let c = spectrum.coefficients(forms, &u0.values);
    let states = times
        .iter()
        .map(|&t| {
            let (re, im): (Vec<f64>, Vec<f64>) = c
                .iter()
                .zip(&spectrum.values)
                .map(|(&ck, &mu)| {
                    let (s, co) = (mu * t).sin_cos();
                    (ck * co, ck * s)
                })
                .unzip();
            let re = spectrum.synthesize(&re);
            let im = spectrum.synthesize(&im);
            re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
        })
        .collect();
    Ok(ComplexTrajectory {
        times,
        states,
        truncated: spectrum.is_truncated(),
    })
}

/// `u(t) = sum_k [c_k cos(sqrt(mu_k) t) + d_k sin(sqrt(mu_k) t) / sqrt(mu_k)] phi_k`,
/// with `c_k + d_k t` for the zero modes.
pub fn evolve_wave(
    forms: &GalerkinForms,
    spectrum: &Spectrum,
    u0: &DiscreteField,
    u1: &DiscreteField,
    t_end: f64,
    samples: usize,
) -> Result<WaveTrajectory> {
    check_u(forms, spectrum, u0)?;
    check_u(forms, spectrum, u1)?;
    let times = sample_times(t_end, samples)?;
    let c = spectrum.coefficients(forms, &u0.values);
    let d = spectrum.coefficients(forms, &u1.values);
    let tol = zero_tolerance(spectrum);
    let mut states = Vec::with_capacity(times.len());
    let mut velocities = Vec::with_capacity(times.len());
    for &t in &times {
        let (pos, vel): (Vec<f64>, Vec<f64>) = (0..c.len())
            .map(|k| {
                let mu = spectrum.values[k];
                if mu.abs() <= tol {
                    (c[k] + d[k] * t, d[k])
                } else {
                    let w = mu.sqrt();
                    let (s, co) = (w * t).sin_cos();
                    (c[k] * co + d[k] * s / w, -c[k] * w * s + d[k] * co)
                }
            })
            .unzip();
        states.push(DiscreteField::new(u0.mesh.clone(), spectrum.synthesize(&pos))?);
        velocities.push(DiscreteField::new(u0.mesh.clone(), spectrum.synthesize(&vel))?);
    }
    Ok(WaveTrajectory {
        times,
        states,
        velocities,
        truncated: spectrum.is_truncated(),
    })
}

/// `||u_t||^2_{L2(Omega)} + a(u, u)` with `a` the spectrum's form.
pub fn wave_energy(forms: &GalerkinForms, spectrum: &Spectrum, u: &[f64], ut: &[f64]) -> f64 {
    let a = form_matrix(forms, spectrum);
    let x = DVector::from_column_slice(u);
    forms.m.quad_form(ut, ut) + x.dot(&(&a * &x))
}

/// `||u||_{L2(Omega)}` of a complex state.
pub fn complex_l2(forms: &GalerkinForms, u: &[Complex<f64>]) -> f64 {
    let re: Vec<f64> = u.iter().map(|z| z.re).collect();
    let im: Vec<f64> = u.iter().map(|z| z.im).collect();
    (forms.m.quad_form(&re, &re) + forms.m.quad_form(&im, &im)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_forms, build_mesh};
    use crate::kernels::{make_kernel, KernelParams, Normalization};
    use std::sync::Arc;

    fn forms(alpha: f64, n: usize, tail: TailMode) -> GalerkinForms {
        let k = make_kernel(&KernelParams::Fractional {
            alpha,
            normalization: Normalization::ExactC,
            factor: 1.0,
        })
        .unwrap();
        let mesh = Arc::new(build_mesh(0.0, 1.0, n, 1.0).unwrap());
        assemble_forms(mesh, &k, 4, tail).unwrap()
    }

    #[test]
    fn neumann_ground_state_is_constant() {
        let f = forms(1.0, 32, TailMode::Drop);
        let s = eig(&f, &Condition::Neumann, usize::MAX).unwrap();
        assert!(s.values[0].abs() < 1e-10);
        let v0 = &s.vectors[0].values;
        for &i in &f.mesh.omega_closure() {
            assert!((v0[i] - 1.0).abs() < 1e-9, "{}", v0[i]);
        }
        assert!(s.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(orthonormality_defect(&f, &s) < 1e-10);
        assert!(rayleigh_residual(&f, &s) < 1e-9);
    }

    #[test]
    fn robin_sits_between_ground_state_and_dirichlet() {
        let f = forms(1.5, 32, TailMode::Drop);
        let n = eig(&f, &Condition::Neumann, 2).unwrap();
        let d = eig(&f, &Condition::Dirichlet, 2).unwrap();
        assert!(d.values[0] > 0.0);
        let mut last = n.values[0];
        for beta in [0.1, 1.0, 10.0, 1e3] {
            let c = Condition::Robin {
                beta: crate::field::FunctionSpec::Constant { value: beta }.build().unwrap(),
                k: None,
            };
            let g = eig(&f, &c, 2).unwrap().values[0];
            assert!(g >= last && g <= d.values[0], "{beta} {g}");
            last = g;
        }
        let p = poincare_constant(&f, PoincareMode::DirichletFriedrichs).unwrap();
        assert!((p * d.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn robin_without_weight_is_rejected() {
        let f = forms(1.0, 16, TailMode::Drop);
        let c = Condition::Robin {
            beta: crate::field::FunctionSpec::Constant { value: 0.0 }.build().unwrap(),
            k: None,
        };
        assert!(matches!(eig(&f, &c, 2), Err(NonlocalError::RobinPrecondition)));
    }

    #[test]
    fn perturbation_is_detected() {
        let f = forms(1.0, 32, TailMode::Drop);
        let s = eig(&f, &Condition::Neumann, 3).unwrap();
        let mut v = s.vectors[1].values.clone();
        for (i, x) in v.iter_mut().enumerate() {
            *x += 1e-3 * ((i * 7919) % 13) as f64 / 13.0;
        }
        assert!(pair_residual(&f, &s, s.values[1], &v) > 1e-5);
    }

    #[test]
    fn dtn_annihilates_constants() {
        let f = forms(1.0, 16, TailMode::Drop);
        let d = dtn_matrix(&f, 0.0).unwrap();
        let dg = d.apply(&vec![1.0; d.nodes.len()]).unwrap();
        let norm = d.matrix.amax();
        assert!(dg.iter().all(|x| x.abs() < 1e-10 * norm.max(1.0)));
        assert!(d.symmetry_defect() < 1e-10);
    }

    #[test]
    fn heat_single_mode_and_conservation() {
        let f = forms(1.0, 24, TailMode::Drop);
        let s = eig(&f, &Condition::Neumann, usize::MAX).unwrap();
        let tr = evolve_heat(&f, &s, &s.vectors[1], None, 0.5, 6).unwrap();
        assert!(!tr.truncated);
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let decay = (-s.values[1] * t).exp();
            for &i in &f.mesh.omega_closure() {
                assert!((u.values[i] - decay * s.vectors[1].values[i]).abs() < 1e-10);
            }
        }
        let u0 = f.mesh.interpolate(|x| (3.0 * x).exp());
        let tr = evolve_heat(&f, &s, &u0, None, 1.0, 11).unwrap();
        let ones = vec![1.0; f.n()];
        let mass0 = f.m.quad_form(&u0.values, &ones);
        for u in &tr.states {
            assert!((f.m.quad_form(&u.values, &ones) - mass0).abs() < 1e-10);
        }
    }

    #[test]
    fn heat_duhamel_reaches_steady_state() {
        let f = forms(1.0, 24, TailMode::Drop);
        let s = eig(&f, &Condition::Dirichlet, usize::MAX).unwrap();
        let load = crate::assembly::omega_load(
            &f.mesh,
            &crate::field::FunctionSpec::Constant { value: 1.0 }.build().unwrap(),
        )
        .unwrap();
        let forcing = Forcing::constant(load.clone());
        let tr = evolve_heat(&f, &s, &DiscreteField::zeros(f.mesh.clone()), Some(&forcing), 40.0, 3).unwrap();
        let inner = f.mesh.indices(NodeTag::Interior);
        let a = submatrix(&f.e, &inner, &inner);
        let b = crate::linalg::subvector(&load, &inner);
        let steady = crate::linalg::solve_dense(&a, &b).unwrap();
        let last = tr.states.last().unwrap();
        for (k, &i) in inner.iter().enumerate() {
            assert!((last.values[i] - steady[k]).abs() < 1e-9);
        }
        // switching the load off at t = 1 matches free decay from u(1)
        let f2 = Forcing { starts: vec![0.0, 1.0], loads: vec![load, vec![0.0; f.n()]] };
        let on = evolve_heat(&f, &s, &DiscreteField::zeros(f.mesh.clone()), Some(&f2), 2.0, 3).unwrap();
        let free = evolve_heat(&f, &s, &on.states[1], None, 1.0, 2).unwrap();
        for i in 0..f.n() {
            assert!((on.states[2].values[i] - free.states[1].values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn schrodinger_and_wave_invariants() {
        let f = forms(1.2, 24, TailMode::Drop);
        let s = eig(&f, &Condition::Neumann, usize::MAX).unwrap();
        let u0 = f.mesh.interpolate(|x| x * x - 0.3);
        let tr = evolve_schrodinger(&f, &s, &u0, 2.0, 9).unwrap();
        let n0 = f.m.quad_form(&u0.values, &u0.values).sqrt();
        for z in &tr.states {
            assert!((complex_l2(&f, z) - n0).abs() < 1e-10);
        }
        let w = evolve_wave(&f, &s, &s.vectors[1], &DiscreteField::zeros(f.mesh.clone()), 3.0, 7).unwrap();
        let om = s.values[1].sqrt();
        for (t, u) in w.times.iter().zip(&w.states) {
            for &i in &f.mesh.omega_closure() {
                assert!((u.values[i] - (om * t).cos() * s.vectors[1].values[i]).abs() < 1e-10);
            }
        }
        let w = evolve_wave(&f, &s, &s.vectors[0], &s.vectors[0], 2.0, 3).unwrap();
        for (t, u) in w.times.iter().zip(&w.states) {
            for &i in &f.mesh.omega_closure() {
                assert!((u.values[i] - (1.0 + t) * s.vectors[0].values[i]).abs() < 1e-9);
            }
        }
        let w = evolve_wave(&f, &s, &u0, &f.mesh.interpolate(|x| x.sin()), 2.0, 9).unwrap();
        let e0 = wave_energy(&f, &s, &w.states[0].values, &w.velocities[0].values);
        for (u, v) in w.states.iter().zip(&w.velocities) {
            assert!((wave_energy(&f, &s, &u.values, &v.values) - e0).abs() < 1e-8 * e0.max(1.0));
        }
    }

    #[test]
    fn dtn_links_to_robin_spectrum() {
        let f = forms(1.0, 24, TailMode::Drop);
        let mu1 = eig(&f, &Condition::Neumann, 2).unwrap().values[1];
        let lam1 = eig(&f, &Condition::Dirichlet, 1).unwrap().values[0];
        let lambda = 0.5 * lam1.min(mu1);
        let d = dtn_matrix(&f, lambda).unwrap();
        let links = d.robin_link(&f, None, usize::MAX).unwrap();
        for l in &links {
            assert!(l.residual <= 1e-6 * l.scale, "{} {}", l.residual, l.scale);
        }
        let beta = links.iter().map(|l| l.beta).find(|b| *b > 0.0).unwrap();
        let c = Condition::Robin {
            beta: crate::field::FunctionSpec::Constant { value: beta }.build().unwrap(),
            k: None,
        };
        let g = eig(&f, &c, usize::MAX).unwrap();
        assert!(g.values.iter().any(|v| (v - lambda).abs() < 1e-8 * lambda));
        assert!(matches!(dtn_matrix(&f, lam1), Err(NonlocalError::Resonance { index: 0, .. })));
    }
}

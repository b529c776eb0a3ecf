//! Uniform meshes with a complement collar, P1 elements, and assembly of the
//! discrete nonlocal form, mass matrices, loads and far-field tail terms.
//!
//! `E(u, v) = 1/2 int int_{(Omega^c x Omega^c)^c} (u(x)-u(y)) (v(x)-v(y)) nu(x-y)`
//! is assembled over ordered element pairs with at least one element in
//! `Omega`. On a uniform mesh the local matrix of a pair depends only on
//! the element offset, so one local matrix per offset is integrated and then
//! scattered.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NonlocalError, Result};
use crate::field::{Jet, Regularity, ScalarField, Support};
use crate::kernels::{KernelSpec, WeightSpec};
use crate::linalg::{format_g17, SymTridiag};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTag {
    Interior,
    Boundary,
    Complement,
}

/// Uniform mesh of `T = [a - R, b + R]` with `a`, `b` as nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub collar: f64,
    /// Cells in `Omega`.
    pub n_omega: usize,
    /// Cells in each collar.
    pub n_collar: usize,
    pub nodes: Vec<f64>,
    pub tags: Vec<NodeTag>,
}

/// Build the mesh; the collar is rounded up to a whole number of cells.
pub fn build_mesh(a: f64, b: f64, n_interior: usize, collar: f64) -> Result<Mesh1D> {
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(NonlocalError::DegenerateInterval { a, b });
    }
    if n_interior < 4 {
        return Err(NonlocalError::Domain(format!(
            "need at least 4 cells in Omega (got {n_interior})"
        )));
    }
    if !(collar > 0.0) || !collar.is_finite() {
        return Err(NonlocalError::Domain(format!("collar {collar} must be positive")));
    }
    let h = (b - a) / n_interior as f64;
    let n_collar = ((collar / h) - 1e-9).ceil().max(1.0) as usize;
    let total = n_interior + 2 * n_collar + 1;
    let mut nodes = Vec::with_capacity(total);
    let mut tags = Vec::with_capacity(total);
    for i in 0..total {
        let k = i as i64 - n_collar as i64;
        let x = if k == 0 {
            a
        } else if k == n_interior as i64 {
            b
        } else if k > 0 && k < n_interior as i64 {
            a + (b - a) * (k as f64 / n_interior as f64)
        } else {
            a + k as f64 * h
        };
        nodes.push(x);
        tags.push(if k == 0 || k == n_interior as i64 {
            NodeTag::Boundary
        } else if k > 0 && k < n_interior as i64 {
            NodeTag::Interior
        } else {
            NodeTag::Complement
        });
    }
    Ok(Mesh1D {
        a,
        b,
        h,
        collar: n_collar as f64 * h,
        n_omega: n_interior,
        n_collar,
        nodes,
        tags,
    })
}

impl Mesh1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn universe(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    pub fn cell_in_omega(&self, c: usize) -> bool {
        c >= self.n_collar && c < self.n_collar + self.n_omega
    }

    pub fn indices(&self, tag: NodeTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tags[i] == tag).collect()
    }

    /// Interior and boundary nodes: the nodes carrying `L2(Omega)` mass.
    pub fn omega_closure(&self) -> Vec<usize> {
        (self.n_collar..=self.n_collar + self.n_omega).collect()
    }

    pub fn complement(&self) -> Vec<usize> {
        self.indices(NodeTag::Complement)
    }

    /// Complement and boundary nodes.
    pub fn exterior_closure(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.tags[i] != NodeTag::Interior)
            .collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.indices(NodeTag::Interior).len(),
            self.indices(NodeTag::Boundary).len(),
            self.complement().len(),
        )
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> DiscreteField {
        DiscreteField {
            mesh: self.clone(),
            values: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Coefficients of a P1 function over the mesh nodes.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub mesh: Arc<Mesh1D>,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(NonlocalError::MeshMismatch);
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    /// Piecewise-linear value; zero outside the mesh universe.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.mesh.universe();
        if x < lo || x > hi {
            return 0.0;
        }
        let h = self.mesh.h;
        let c = (((x - lo) / h).floor() as usize).min(self.mesh.n_cells() - 1);
        let t = (x - self.mesh.nodes[c]) / h;
        self.values[c] * (1.0 - t) + self.values[c + 1] * t
    }

    pub fn same_mesh(&self, other: &Mesh1D) -> bool {
        std::ptr::eq(self.mesh.as_ref(), other) || self.mesh.as_ref() == other
    }

    /// View as a scalar field (piecewise-linear class).
    pub fn to_field(&self) -> ScalarField {
        let me = self.clone();
        let (lo, hi) = self.mesh.universe();
        let h = self.mesh.h;
        ScalarField::from_jet(
            move |x| {
                let v = me.eval(x);
                let (lo, _) = me.mesh.universe();
                let c = (((x - lo) / h).floor().max(0.0) as usize).min(me.mesh.n_cells() - 1);
                let slope = (me.values[c + 1] - me.values[c]) / h;
                Jet { v, d1: slope, d2: 0.0 }
            },
            Support::Compact { lo, hi },
            self.mesh.nodes.clone(),
            Regularity::P1Discrete,
        )
    }

    /// `L2(Omega)` inner product with `M`.
    pub fn omega_dot(&self, other: &DiscreteField, mass: &SymTridiag) -> f64 {
        mass.quad_form(&self.values, &other.values)
    }
}

/// How the interaction of `Omega` with the complement beyond the collar is
/// treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Ignored.
    Drop,
    /// Data beyond the collar is zero: adds `int_Omega phi_i phi_j tau`.
    DirichletZero,
    /// Data beyond the collar is constant on each side: same matrix term
    /// plus a load term.
    DirichletConst,
}

/// Assembled discrete forms on one mesh.
#[derive(Debug, Clone)]
pub struct GalerkinForms {
    pub mesh: Arc<Mesh1D>,
    pub kernel: KernelSpec,
    pub quad_order: usize,
    pub tail_mode: TailMode,
    /// Discrete form, including the tail matrix unless `tail_mode = Drop`.
    pub e: DMatrix<f64>,
    /// `L2(Omega)` mass over all nodes (zero rows off `closure(Omega)`).
    pub m: SymTridiag,
    /// `int_Omega phi_i phi_j tau`, `tau(x) = int_{y outside T} nu(x - y) dy`.
    pub tail_matrix: SymTridiag,
    /// `int_Omega phi_i tail(x - T_lo)`.
    pub tail_load_left: Vec<f64>,
    /// `int_Omega phi_i tail(T_hi - x)`.
    pub tail_load_right: Vec<f64>,
}

impl GalerkinForms {
    pub fn n(&self) -> usize {
        self.mesh.len()
    }

    pub fn check_field(&self, u: &DiscreteField) -> Result<()> {
        if u.values.len() != self.n() || !u.same_mesh(&self.mesh) {
            return Err(NonlocalError::MeshMismatch);
        }
        Ok(())
    }

    /// Spectral norm estimate `max_ij |E_ij| * n`-free: the max-abs entry.
    pub fn e_scale(&self) -> f64 {
        self.e.amax()
    }

    /// Write the form matrix in coordinate (matrix-market style) format.
    pub fn export_e<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_matrix_market(&self.e, w)
    }
}

/// Symmetric coordinate export: header, size line, lower-triangle triplets
/// (1-based), `%.17g` values.
pub fn write_matrix_market<W: Write>(a: &DMatrix<f64>, mut w: W) -> std::io::Result<()> {
    let n = a.nrows();
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for i in j..n {
            if a[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, a[(i, j)]));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", n, a.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i, j, format_g17(v))?;
    }
    Ok(())
}

/// Local matrices for one element offset.
#[derive(Debug, Clone)]
enum Local {
    Same([[f64; 2]; 2]),
    Touching([[f64; 3]; 3]),
    Separated([[f64; 4]; 4]),
}

/// `int_{w0}^{w1} (c0 + c1 w + c2 w^2) dw`.
fn poly_int(c: [f64; 3], w0: f64, w1: f64) -> f64 {
    c[0] * (w1 - w0) + c[1] * (w1 * w1 - w0 * w0) / 2.0 + c[2] * (w1.powi(3) - w0.powi(3)) / 3.0
}

/// Coefficients of the 3x3 polynomial matrix
/// `[w, 1-2w, -(1-w)] [w, 1-2w, -(1-w)]^T`.
fn touching_poly() -> [[[f64; 3]; 3]; 3] {
    let d = [[0.0, 1.0, 0.0], [1.0, -2.0, 0.0], [-1.0, 1.0, 0.0]];
    let mut p = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (d[i], d[j]);
            p[i][j] = [a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1]];
        }
    }
    p
}

fn local_same(kernel: &KernelSpec, h: f64) -> Result<Local> {
    // (1/h^2) * 2 int_0^h (h - r) r^2 nu(r) dr
    let c = 2.0 / (h * h) * kernel.integrate_moment(2.0, &|r| h - r, 0.0, h, &[])?;
    Ok(Local::Same([[c, -c], [-c, c]]))
}

fn local_touching(kernel: &KernelSpec, h: f64) -> Result<Local> {
    let p = touching_poly();
    let inner = kernel.integrate_moment(3.0, &|_| 1.0, 0.0, h, &[])? / (h * h);
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let c = p[i][j];
            let outer = kernel.integrate_moment(
                3.0,
                &|r| poly_int(c, 1.0 - h / r, h / r),
                h,
                2.0 * h,
                &[],
            )? / (h * h);
            a[i][j] = inner * poly_int(c, 0.0, 1.0) + outer;
            a[j][i] = a[i][j];
        }
    }
    Ok(Local::Touching(a))
}

fn local_separated(kernel: &KernelSpec, h: f64, m: usize, order: usize) -> Local {
    let mf = m as f64;
    let mut cuts: Vec<f64> = vec![-1.0, 0.0, 1.0];
    for b in kernel.breakpoints() {
        let d = b / h - mf;
        if d > -1.0 && d < 1.0 {
            cuts.push(d);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let outer = gauss_legendre(order);
    let inner = gauss_legendre(2);
    let mut a = [[0.0; 4]; 4];
    for seg in cuts.windows(2) {
        let (c, r) = (0.5 * (seg[0] + seg[1]), 0.5 * (seg[1] - seg[0]));
        for (&t, &w) in outer.nodes.iter().zip(&outer.weights) {
            let delta = c + r * t;
            let nu = kernel.density(h * (mf + delta));
            if nu == 0.0 {
                continue;
            }
            let (s0, s1) = if delta < 0.0 { (-delta, 1.0) } else { (0.0, 1.0 - delta) };
            let (sc, sr) = (0.5 * (s0 + s1), 0.5 * (s1 - s0));
            for (&ts, &ws) in inner.nodes.iter().zip(&inner.weights) {
                let s = sc + sr * ts;
                let tt = s + delta;
                let d = [1.0 - s, s, -(1.0 - tt), -tt];
                let wt = w * r * ws * sr * nu * h * h;
                for i in 0..4 {
                    for j in 0..4 {
                        a[i][j] += wt * d[i] * d[j];
                    }
                }
            }
        }
    }
    Local::Separated(a)
}

/// Largest element offset with a nonzero interaction.
fn max_offset(kernel: &KernelSpec, mesh: &Mesh1D) -> usize {
    let nc = mesh.n_cells();
    match kernel.support_radius() {
        Some(s) => ((s / mesh.h).floor() as usize + 1).min(nc - 1),
        None => nc - 1,
    }
}

/// Pair weights: `(both in Omega, exactly one in Omega)`.
fn assemble_pairs(
    mesh: &Mesh1D,
    kernel: &KernelSpec,
    quad_order: usize,
    weights: (f64, f64),
) -> Result<DMatrix<f64>> {
    let sigma = kernel.singular_exponent();
    if sigma >= 2.0 {
        return Err(NonlocalError::NonIntegrableForm(sigma));
    }
    if quad_order < 4 {
        return Err(NonlocalError::Domain(format!("quad_order {quad_order} must be >= 4")));
    }
    let h = mesh.h;
    let nc = mesh.n_cells();
    let maxoff = max_offset(kernel, mesh);
    let locals: Vec<Local> = (0..=maxoff)
        .into_par_iter()
        .map(|m| match m {
            0 => local_same(kernel, h),
            1 => local_touching(kernel, h),
            _ => Ok(local_separated(kernel, h, m, quad_order)),
        })
        .collect::<Result<Vec<_>>>()?;
    let n = mesh.len();
    let mut e = DMatrix::<f64>::zeros(n, n);
    for c in 0..nc {
        let in_c = mesh.cell_in_omega(c);
        for (m, local) in locals.iter().enumerate() {
            let f = c + m;
            if f >= nc {
                break;
            }
            let in_f = mesh.cell_in_omega(f);
            let w = match (in_c, in_f) {
                (true, true) => weights.0,
                (false, false) => continue,
                _ => weights.1,
            };
            match local {
                Local::Same(a) => {
                    if !in_c {
                        continue;
                    }
                    let idx = [c, c + 1];
                    for i in 0..2 {
                        for j in 0..2 {
                            e[(idx[i], idx[j])] += 0.5 * w * a[i][j];
                        }
                    }
                }
                Local::Touching(a) => {
                    let idx = [c, c + 1, c + 2];
                    for i in 0..3 {
                        for j in 0..3 {
                            e[(idx[i], idx[j])] += w * a[i][j];
                        }
                    }
                }
                Local::Separated(a) => {
                    let idx = [c, c + 1, f, f + 1];
                    for i in 0..4 {
                        for j in 0..4 {
                            e[(idx[i], idx[j])] += w * a[i][j];
                        }
                    }
                }
            }
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (e[(i, j)] + e[(j, i)]);
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    Ok(e)
}

const CELL_GAUSS: usize = 10;

/// `int phi_i phi_j w` over the cells selected by `cells`.
fn weighted_mass(
    mesh: &Mesh1D,
    cells: impl Iterator<Item = usize>,
    w: &dyn Fn(f64) -> Result<f64>,
) -> Result<SymTridiag> {
    let mut t = SymTridiag::zeros(mesh.len());
    let rule = gauss_legendre(CELL_GAUSS);
    let h = mesh.h;
    for c in cells {
        let x0 = mesh.nodes[c];
        let mut loc = [0.0; 3];
        for (&q, &wq) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * (q + 1.0);
            let wt = 0.5 * wq * h * w(x0 + s * h)?;
            loc[0] += wt * (1.0 - s) * (1.0 - s);
            loc[1] += wt * (1.0 - s) * s;
            loc[2] += wt * s * s;
        }
        t.add(c, c, loc[0]);
        t.add(c, c + 1, loc[1]);
        t.add(c + 1, c + 1, loc[2]);
    }
    Ok(t)
}

/// `int phi_i f` over the selected cells.
fn weighted_load(
    mesh: &Mesh1D,
    cells: impl Iterator<Item = usize>,
    f: &dyn Fn(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh.len()];
    let rule = gauss_legendre(CELL_GAUSS);
    let h = mesh.h;
    for c in cells {
        let x0 = mesh.nodes[c];
        for (&q, &wq) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * (q + 1.0);
            let wt = 0.5 * wq * h * f(x0 + s * h)?;
            b[c] += wt * (1.0 - s);
            b[c + 1] += wt * s;
        }
    }
    Ok(b)
}

fn omega_cells(mesh: &Mesh1D) -> impl Iterator<Item = usize> + '_ {
    mesh.n_collar..mesh.n_collar + mesh.n_omega
}

fn complement_cells(mesh: &Mesh1D) -> impl Iterator<Item = usize> + '_ {
    (0..mesh.n_cells()).filter(|&c| !mesh.cell_in_omega(c))
}

/// `L2(Omega)` mass matrix.
pub fn mass_matrix(mesh: &Mesh1D) -> SymTridiag {
    let mut t = SymTridiag::zeros(mesh.len());
    let h = mesh.h;
    for c in omega_cells(mesh) {
        t.add(c, c, h / 3.0);
        t.add(c, c + 1, h / 6.0);
        t.add(c + 1, c + 1, h / 3.0);
    }
    t
}

/// Assemble the discrete form, mass and tail terms.
pub fn assemble_forms(
    mesh: Arc<Mesh1D>,
    kernel: &KernelSpec,
    quad_order: usize,
    tail_mode: TailMode,
) -> Result<GalerkinForms> {
    let mut e = assemble_pairs(&mesh, kernel, quad_order, (1.0, 1.0))?;
    let (t_lo, t_hi) = mesh.universe();
    let tail_matrix = weighted_mass(&mesh, omega_cells(&mesh), &|x| {
        Ok(kernel.tail(x - t_lo)? + kernel.tail(t_hi - x)?)
    })?;
    let tail_load_left = weighted_load(&mesh, omega_cells(&mesh), &|x| kernel.tail(x - t_lo))?;
    let tail_load_right = weighted_load(&mesh, omega_cells(&mesh), &|x| kernel.tail(t_hi - x))?;
    if tail_mode != TailMode::Drop {
        tail_matrix.add_to_dense(&mut e, 1.0);
    }
    Ok(GalerkinForms {
        m: mass_matrix(&mesh),
        mesh,
        kernel: kernel.clone(),
        quad_order,
        tail_mode,
        e,
        tail_matrix,
        tail_load_left,
        tail_load_right,
    })
}

/// Matrix of `|u|_V^2 = int int_{Omega x T} (u(x) - u(y))^2 nu(x - y)`.
pub fn assemble_v_seminorm(
    mesh: &Mesh1D,
    kernel: &KernelSpec,
    quad_order: usize,
) -> Result<DMatrix<f64>> {
    assemble_pairs(mesh, kernel, quad_order, (2.0, 1.0))
}

/// `u^T E u`.
pub fn seminorm_e(forms: &GalerkinForms, u: &DiscreteField) -> Result<f64> {
    forms.check_field(u)?;
    let x = nalgebra::DVector::from_column_slice(&u.values);
    Ok((x.transpose() * &forms.e * &x)[(0, 0)])
}

/// Weight applied to complement data or the Robin term.
#[derive(Debug, Clone)]
pub enum ComplementWeight {
    None,
    Weight(WeightSpec),
    /// `beta(y) * weight(y)`.
    Scaled(ScalarField, WeightSpec),
}

impl ComplementWeight {
    pub fn eval(&self, y: f64) -> Result<f64> {
        match self {
            ComplementWeight::None => Ok(1.0),
            ComplementWeight::Weight(w) => w.eval(y),
            ComplementWeight::Scaled(beta, w) => Ok(beta.eval(y) * w.eval(y)?),
        }
    }
}

/// `int_{T \ Omega} phi_i phi_j weight`.
pub fn complement_mass(mesh: &Mesh1D, weight: &ComplementWeight) -> Result<SymTridiag> {
    weighted_mass(mesh, complement_cells(mesh), &|y| weight.eval(y))
}

/// `int_Omega f phi_i + int_{T \ Omega} g phi_i weight`.
pub fn assemble_load(
    mesh: &Mesh1D,
    f: &ScalarField,
    g: &ScalarField,
    g_weight: &ComplementWeight,
) -> Result<Vec<f64>> {
    let bf = omega_load(mesh, f)?;
    let bg = complement_load(mesh, g, g_weight)?;
    Ok(bf.iter().zip(&bg).map(|(a, b)| a + b).collect())
}

pub fn omega_load(mesh: &Mesh1D, f: &ScalarField) -> Result<Vec<f64>> {
    weighted_load(mesh, omega_cells(mesh), &|x| Ok(f.eval(x)))
}

pub fn complement_load(
    mesh: &Mesh1D,
    g: &ScalarField,
    weight: &ComplementWeight,
) -> Result<Vec<f64>> {
    weighted_load(mesh, complement_cells(mesh), &|y| Ok(g.eval(y) * weight.eval(y)?))
}

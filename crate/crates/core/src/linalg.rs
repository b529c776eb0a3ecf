//! Dense and tridiagonal helpers shared by the solvers and the spectral code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{NonlocalError, Result};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match i.abs_diff(j) {
            0 => self.diag[i] += v,
            1 => self.off[i.min(j)] += v,
            _ => panic!("entry ({i}, {j}) outside the tridiagonal band"),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| d * s).collect(),
            off: self.off.iter().map(|d| d * s).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Add into a dense matrix.
    pub fn add_to_dense(&self, m: &mut DMatrix<f64>, s: f64) {
        for i in 0..self.len() {
            m[(i, i)] += s * self.diag[i];
            if i + 1 < self.len() {
                m[(i, i + 1)] += s * self.off[i];
                m[(i + 1, i)] += s * self.off[i];
            }
        }
    }

    /// Principal submatrix on sorted indices; entries between indices that
    /// are not adjacent in the original numbering are dropped.
    pub fn restrict(&self, idx: &[usize]) -> SymTridiag {
        let mut r = SymTridiag::zeros(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            r.diag[k] = self.diag[i];
            if k + 1 < idx.len() && idx[k + 1] == i + 1 {
                r.off[k] = self.off[i];
            }
        }
        r
    }

    /// Solve `T x = b` by the Thomas algorithm.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Ok(vec![]);
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(NonlocalError::SingularSystem("zero pivot in tridiagonal solve".into()));
        }
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(NonlocalError::SingularSystem(
                    "zero pivot in tridiagonal solve".into(),
                ));
            }
            c[i] = if i + 1 < n { self.off[i] / denom } else { 0.0 };
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Dense principal submatrix `A[rows, cols]`.
pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn subvector(v: &[f64], idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Solve a dense symmetric system; Cholesky first, LU as fallback.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let lu = a.clone().lu();
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| NonlocalError::SingularSystem("dense factorization failed".into()))
}

/// Solve with iterative refinement (one or two steps) for tighter residuals.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| NonlocalError::SingularSystem("dense factorization failed".into()))?;
    for _ in 0..2 {
        let r = b - a * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
    }
    Ok(x)
}

/// Generalized symmetric-definite eigenproblem `A x = lambda B x`.
/// Eigenvalues ascending, eigenvectors `B`-orthonormal with the first
/// component of magnitude above `1e-12` positive.
pub fn generalized_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let ch = b
        .clone()
        .cholesky()
        .ok_or_else(|| NonlocalError::Eigen("mass matrix is not positive definite".into()))?;
    let l = ch.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| NonlocalError::Eigen("triangular solve failed".into()))?;
    let c_t = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| NonlocalError::Eigen("triangular solve failed".into()))?;
    let c = (&c_t + c_t.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| NonlocalError::Eigen("symmetric eigensolver did not converge".into()))?;
    let lt = l.transpose();
    let vecs = lt
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| NonlocalError::Eigen("back substitution failed".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut out = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = vecs.column(i).clone_owned();
        let norm = (col.transpose() * b * &col)[(0, 0)].sqrt();
        col /= norm;
        fix_sign(col.as_mut_slice());
        out.set_column(k, &col);
    }
    Ok((values, out))
}

/// Make the first component with magnitude above `1e-12 * max` positive.
pub fn fix_sign(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * m) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Static condensation of a symmetric matrix `A` onto the index set `p`,
/// eliminating `c` where `A_cc` is tridiagonal in the given order.
#[derive(Debug, Clone)]
pub struct Condensed {
    pub p: Vec<usize>,
    /// Eliminated indices with nonzero diagonal.
    pub c: Vec<usize>,
    /// Eliminated indices whose rows vanish; their values are set to zero.
    pub inactive: Vec<usize>,
    pub acc: SymTridiag,
    /// `A_cc^{-1} A_cp`.
    pub y: DMatrix<f64>,
    /// `A_pp - A_pc A_cc^{-1} A_cp`.
    pub schur: DMatrix<f64>,
}

impl Condensed {
    pub fn new(a: &DMatrix<f64>, p: &[usize], c: &[usize]) -> Result<Self> {
        let scale = a.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (active, inactive): (Vec<usize>, Vec<usize>) =
            c.iter().partition(|&&i| a[(i, i)].abs() > 1e-14 * scale);
        let mut acc = SymTridiag::zeros(active.len());
        for (k, &i) in active.iter().enumerate() {
            acc.diag[k] = a[(i, i)];
            if k + 1 < active.len() {
                acc.off[k] = a[(i, active[k + 1])];
            }
        }
        let acp = submatrix(a, &active, p);
        let mut y = DMatrix::zeros(active.len(), p.len());
        for j in 0..p.len() {
            let col: Vec<f64> = acp.column(j).iter().copied().collect();
            let sol = acc.solve(&col)?;
            y.set_column(j, &DVector::from_vec(sol));
        }
        let app = submatrix(a, p, p);
        let schur_raw = app - acp.transpose() * &y;
        let schur = (&schur_raw + schur_raw.transpose()) * 0.5;
        Ok(Self {
            p: p.to_vec(),
            c: active,
            inactive,
            acc,
            y,
            schur,
        })
    }

    /// Reduced right-hand side `b_p - A_pc A_cc^{-1} b_c`.
    pub fn reduce_rhs(&self, b: &[f64]) -> Result<DVector<f64>> {
        let bp = subvector(b, &self.p);
        let bc = subvector(b, &self.c);
        Ok(bp - self.y.transpose() * bc)
    }

    /// Full vector from the reduced unknowns.
    pub fn expand(&self, up: &DVector<f64>, b: &[f64], n: usize) -> Result<Vec<f64>> {
        let mut u = vec![0.0; n];
        for (k, &i) in self.p.iter().enumerate() {
            u[i] = up[k];
        }
        let bc: Vec<f64> = self.c.iter().map(|&i| b[i]).collect();
        let w = self.acc.solve(&bc)?;
        let yu = &self.y * up;
        for (k, &i) in self.c.iter().enumerate() {
            u[i] = w[k] - yu[k];
        }
        Ok(u)
    }
}

/// Shortest `%.17g`-style rendering of a float.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&e) {
        let sign = if e < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mant), sign, e.abs())
    } else {
        let decimals = (16 - e) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let mut t = SymTridiag::zeros(5);
        for i in 0..5 {
            t.diag[i] = 4.0 + i as f64;
        }
        for i in 0..4 {
            t.off[i] = -1.0 + 0.1 * i as f64;
        }
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x = t.solve(&b).unwrap();
        let xd = t.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..5 {
            assert!((x[i] - xd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn generalized_eigen_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 2.0, 0.5, 0.0, 0.5, 2.0]);
        let (vals, vecs) = generalized_eigen(&a, &b).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let g = vecs.transpose() * &b * &vecs;
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
        let r = &a * &vecs - &b * &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals));
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn condensation_reproduces_full_solve() {
        let n = 6;
        let mut a = DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()));
        // make the eliminated block tridiagonal
        for &(i, j) in &[(0usize, 2usize), (0, 5), (2, 5)] {
            a[(i, j)] = 0.0;
            a[(j, i)] = 0.0;
        }
        for i in 0..n {
            a[(i, i)] += 3.0;
        }
        let c = [0, 2, 5];
        let p = [1, 3, 4];
        // 0-2 and 2-5 are not adjacent in the original numbering
        let cond = Condensed::new(&a, &p, &c).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let up = cond.schur.clone().lu().solve(&cond.reduce_rhs(&b).unwrap()).unwrap();
        let u = cond.expand(&up, &b, n).unwrap();
        let full = a.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((u[i] - full[i]).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn g17_format() {
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.0 / std::f64::consts::PI), "0.31830988618379069");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(-2.5e20), "-2.5e+20");
        assert_eq!(format_g17(123456.0), "123456");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-7, 6.02e23] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }
}

//! One-dimensional quadrature rules.
//!
//! Gauss–Legendre for smooth integrands, Gauss–Jacobi with weight `x^gamma`
//! on `[0, 1]` for algebraic endpoint singularities, and an adaptive
//! Gauss–Kronrod (7/15) driver for everything else.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{NonlocalError, Result};
use crate::special::gamma_pos;

/// Nodes and weights of an `n`-point rule on a reference interval.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_uncached(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on `[-1, 1]`; cached per order.
pub fn gauss_legendre(n: usize) -> &'static Rule {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(legendre_uncached(n))))
}

fn jacobi_uncached(n: usize, gamma: f64) -> Rule {
    // Golub–Welsch for Jacobi(a = 0, b = gamma) on [-1, 1], then mapped to [0, 1].
    let (a, b) = (0.0_f64, gamma);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        t[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + a + b;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            let off = (num / den).sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let mu0 = 2f64.powf(a + b + 1.0) * gamma_pos(a + 1.0) * gamma_pos(b + 1.0)
        / gamma_pos(a + b + 2.0);
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let scale = 0.5f64.powf(b + 1.0);
    Rule {
        nodes: pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect(),
        weights: pairs.iter().map(|p| p.1 * scale).collect(),
    }
}

/// Gauss–Jacobi rule for `int_0^1 x^gamma f(x) dx`, `gamma > -1`; cached.
pub fn gauss_jacobi(n: usize, gamma: f64) -> &'static Rule {
    assert!(gamma > -1.0, "Jacobi exponent must exceed -1");
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), &'static Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry((n, gamma.to_bits()))
        .or_insert_with(|| Box::leak(Box::new(jacobi_uncached(n, gamma))))
}

/// `int_a^b f` with a fixed Gauss–Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| w * f(c + r * t))
        .sum::<f64>()
        * r
}

/// `int_a^b f` with a composite Gauss–Legendre rule over `panels` equal pieces.
pub fn integrate_gl_composite(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
    panels: usize,
) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            integrate_gl(&f, lo, hi, n)
        })
        .sum()
}

/// `int_0^len x^gamma g(x) dx` with an `n`-point Gauss–Jacobi rule.
pub fn integrate_weighted_at_zero(g: impl Fn(f64) -> f64, len: f64, gamma: f64, n: usize) -> f64 {
    let rule = gauss_jacobi(n, gamma);
    let scale = len.powf(gamma + 1.0);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| w * g(len * t))
        .sum::<f64>()
        * scale
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = r * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * r, ((kron - gauss) * r).abs())
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 on `[a, b]`, pre-split at `breaks`.
pub fn adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces: Vec<(f64, f64, f64, f64)> = cuts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(NonlocalError::QuadratureNonConvergence(
                "non-finite integrand".into(),
            ));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(sign * total);
        }
        if pieces.len() >= tol.max_intervals {
            // Accept if the remaining error is at round-off level of the pieces.
            if err <= 1e3 * f64::EPSILON * pieces.iter().map(|p| p.2.abs()).sum::<f64>() {
                return Ok(sign * total);
            }
            return Err(NonlocalError::QuadratureNonConvergence(format!(
                "error estimate {err:e} after {} intervals",
                pieces.len()
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (l, r, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            return Err(NonlocalError::QuadratureNonConvergence(
                "interval collapsed".into(),
            ));
        }
        let (v1, e1) = gk15(&f, l, m);
        let (v2, e2) = gk15(&f, m, r);
        pieces.push((l, m, v1, e1));
        pieces.push((m, r, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got = integrate_gl(|x| x.powi(deg as i32), -1.0, 1.0, n);
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn jacobi_handles_algebraic_singularity() {
        // int_0^1 x^{-0.7} (1 + x^2) dx = 1/0.3 + 1/2.3
        let got = integrate_weighted_at_zero(|x| 1.0 + x * x, 1.0, -0.7, 6);
        assert_relative_eq!(got, 1.0 / 0.3 + 1.0 / 2.3, max_relative = 1e-13);
        // scaled interval: int_0^2 x^{0.5} dx
        let got = integrate_weighted_at_zero(|_| 1.0, 2.0, 0.5, 3);
        assert_relative_eq!(got, 2f64.powf(1.5) / 1.5, max_relative = 1e-13);
        // gamma = 0 reproduces Legendre
        let got = integrate_weighted_at_zero(|x| x.exp(), 1.0, 0.0, 10);
        assert_relative_eq!(got, std::f64::consts::E - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_with_kink_and_breaks() {
        let got = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[], Tolerance::default()).unwrap();
        assert_relative_eq!(got, 0.045 + 0.245, max_relative = 1e-10);
        let got = adaptive(|x: f64| x.sqrt(), 0.0, 1.0, &[0.5], Tolerance::default()).unwrap();
        assert_relative_eq!(got, 2.0 / 3.0, max_relative = 1e-10);
        let rev = adaptive(|x: f64| x, 1.0, 0.0, &[], Tolerance::default()).unwrap();
        assert_relative_eq!(rev, -0.5, max_relative = 1e-14);
    }
}

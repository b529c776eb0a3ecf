//! Pointwise Lévy operator `L`, nonlocal normal derivative `N`, and the
//! nonlocal Green–Gauss identity checked by quadrature.
//!
//! `L u(x) = -int_0^inf (u(x+r) + u(x-r) - 2u(x)) nu(r) dr`
//! `N u(y) = int_Omega (u(x) - u(y)) nu(x - y) dx`, `y` outside `Omega`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{NonlocalError, Result};
use crate::field::{Part, Regularity, ScalarField, Support};
use crate::kernels::KernelSpec;
use crate::quadrature::{adaptive, gauss_legendre, integrate_gl_composite, Tolerance};

const THETA_NODES: usize = 10;
const DIRECT_DIFF_RADIUS: f64 = 1e-2;

fn tol() -> Tolerance {
    Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_intervals: 8000,
    }
}

/// `(u(x+r) + u(x-r) - 2u(x)) / r^2` without cancellation for small `r`.
fn second_difference_quotient(p: &Part, x: f64, r: f64, ux: f64) -> f64 {
    if r > DIRECT_DIFF_RADIUS || !p.has_derivatives {
        return ((p.jet)(x + r).v + (p.jet)(x - r).v - 2.0 * ux) / (r * r);
    }
    // r^2 int_0^1 (1 - t) (u''(x + t r) + u''(x - t r)) dt
    let rule = gauss_legendre(THETA_NODES);
    let mut s = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let th = 0.5 * (t + 1.0);
        s += 0.5 * w * (1.0 - th) * ((p.jet)(x + th * r).d2 + (p.jet)(x - th * r).d2);
    }
    s
}

/// `(u(x + r) - u(x)) / r` without cancellation for small `r`.
pub(crate) fn difference_quotient(u: &ScalarField, x: f64, r: f64) -> f64 {
    if r > DIRECT_DIFF_RADIUS || !u.has_derivatives() {
        return (u.eval(x + r) - u.eval(x)) / r;
    }
    let rule = gauss_legendre(THETA_NODES);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| 0.5 * w * u.jet(x + 0.5 * (t + 1.0) * r).d1)
        .sum()
}

/// Radius `R` that is a whole number of periods and far enough for the
/// two-term oscillatory tail expansion.
fn periodic_cutoff(kernel: &KernelSpec, xi: f64) -> f64 {
    let last = kernel.breakpoints().last().copied().unwrap_or(0.0).max(1.0);
    let min_r = (80.0 * PI / xi).max(50.0 * last);
    (min_r * xi / (2.0 * PI)).ceil() * 2.0 * PI / xi
}

/// `int_R^inf cos(xi r) nu(r) dr` for `R` a multiple of `2 pi / xi`.
fn oscillatory_tail(kernel: &KernelSpec, xi: f64, big_r: f64) -> Result<f64> {
    Ok(-kernel.density_derivative(big_r, 1)? / (xi * xi)
        + kernel.density_derivative(big_r, 3)? / xi.powi(4))
}

fn apply_part(kernel: &KernelSpec, p: &Part, x: f64) -> Result<f64> {
    if let Support::Periodic { xi } = p.support {
        if xi == 0.0 {
            return Ok(0.0);
        }
    }
    let ux = (p.jet)(x).v;
    let mut r_near = kernel
        .breakpoints()
        .first()
        .copied()
        .unwrap_or(1.0)
        .min(1.0);
    let mut breaks: Vec<f64> = kernel.breakpoints();
    for &k in &p.kinks {
        let d = (k - x).abs();
        if d < 1e-12 {
            return Err(NonlocalError::Regularity(format!(
                "u is not twice differentiable at x = {x}"
            )));
        }
        r_near = r_near.min(0.5 * d);
        breaks.push(d);
    }
    if !p.has_derivatives {
        r_near = r_near.min(DIRECT_DIFF_RADIUS);
    }
    let ksupport = kernel.support_radius();
    let (big_r, tail_term) = match p.support {
        Support::Compact { lo, hi } | Support::Decaying { lo, hi } => {
            r_near = r_near.min(0.25 * (hi - lo));
            breaks.push((x - lo).abs());
            breaks.push((x - hi).abs());
            let reach = (x - lo).abs().max((x - hi).abs()).max(r_near);
            let r = ksupport.map_or(reach, |s| s.min(reach));
            (r, -2.0 * ux * kernel.tail(r)?)
        }
        Support::Periodic { xi } => {
            r_near = r_near.min(1.0 / xi);
            match ksupport {
                Some(s) => (s, 0.0),
                None => {
                    let r = periodic_cutoff(kernel, xi);
                    (r, 2.0 * ux * (oscillatory_tail(kernel, xi, r)? - kernel.tail(r)?))
                }
            }
        }
        Support::Global => match ksupport {
            Some(s) => (s, 0.0),
            None => {
                return Err(NonlocalError::Regularity(
                    "unbounded field needs a compactly supported kernel".into(),
                ))
            }
        },
    };
    if let Support::Periodic { xi } = p.support {
        let half = PI / xi;
        let n = ((big_r - r_near) / half).ceil() as usize;
        breaks.extend((1..n.min(100_000)).map(|k| r_near + k as f64 * half));
    }
    let big_r = big_r.max(r_near);
    let near = kernel.integrate_moment(
        2.0,
        &|r| {
            if r == 0.0 {
                (p.jet)(x).d2
            } else {
                second_difference_quotient(p, x, r, ux)
            }
        },
        0.0,
        r_near.min(big_r),
        &[],
    )?;
    let mid = if big_r > r_near {
        adaptive(
            |r| ((p.jet)(x + r).v + (p.jet)(x - r).v - 2.0 * ux) * kernel.density(r),
            r_near,
            big_r,
            &breaks,
            tol(),
        )?
    } else {
        0.0
    };
    Ok(-(near + mid + tail_term))
}

/// `L u(x)` by the second-difference representation.
pub fn apply_l(kernel: &KernelSpec, u: &ScalarField, x: f64) -> Result<f64> {
    if u.regularity() == Regularity::P1Discrete {
        return Err(NonlocalError::Regularity(
            "pointwise L is undefined for piecewise-linear fields".into(),
        ));
    }
    u.parts().iter().map(|p| apply_part(kernel, p, x)).sum()
}

/// `N u(y) = int_a^b (u(x) - u(y)) nu(x - y) dx` for `y` outside `[a, b]`.
pub fn apply_n(kernel: &KernelSpec, omega: (f64, f64), u: &ScalarField, y: f64) -> Result<f64> {
    let (a, b) = omega;
    if !(b > a) {
        return Err(NonlocalError::DegenerateInterval { a, b });
    }
    if y >= a && y <= b {
        return Err(NonlocalError::SingularEvaluation(y));
    }
    if y > b {
        apply_n_at_distance(kernel, omega, u, true, y - b)
    } else {
        apply_n_at_distance(kernel, omega, u, false, a - y)
    }
}

/// `N u` at the point at distance `d > 0` to the right (or left) of `Omega`,
/// integrating in `rho = |x - y|` so that `d` keeps full relative precision.
pub(crate) fn apply_n_at_distance(
    kernel: &KernelSpec,
    omega: (f64, f64),
    u: &ScalarField,
    right: bool,
    d: f64,
) -> Result<f64> {
    let (a, b) = omega;
    let l = b - a;
    let y = if right { b + d } else { a - d };
    let uy = u.eval(y);
    let mut breaks = kernel.breakpoints();
    breaks.push(DIRECT_DIFF_RADIUS);
    for k in u.kinks() {
        breaks.push((k - y).abs());
    }
    let mut g = 2.0 * d;
    while g < d + l {
        breaks.push(g);
        g *= 2.0;
    }
    adaptive(
        |rho| {
            let diff = if right {
                -rho * difference_quotient(u, y - rho, rho)
            } else if rho <= DIRECT_DIFF_RADIUS {
                rho * difference_quotient(u, y, rho)
            } else {
                u.eval(y + rho) - uy
            };
            diff * kernel.density(rho)
        },
        d,
        d + l,
        &breaks,
        tol(),
    )
}

/// The three terms of the nonlocal Green–Gauss identity
/// `int_Omega (Lu) v = E(u, v) + int_{Omega^c} (Nu) v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenGaussTerms {
    pub operator_side: f64,
    pub energy: f64,
    pub flux: f64,
}

impl GreenGaussTerms {
    pub fn residual(&self) -> f64 {
        (self.operator_side - self.energy - self.flux).abs()
    }
}

const X_NODES: usize = 20;
const X_SUB: usize = 4;

fn inner_tol() -> Tolerance {
    Tolerance {
        abs: 1e-15,
        rel: 1e-12,
        max_intervals: 2000,
    }
}

/// Support edges and kinks of the fields.
fn feature_points(fields: &[&ScalarField]) -> Vec<f64> {
    let mut e = Vec::new();
    for f in fields {
        e.extend(f.kinks());
        for p in f.parts() {
            if let Some((lo, hi)) = p.support.hull() {
                e.push(lo);
                e.push(hi);
            }
        }
    }
    e.sort_by(f64::total_cmp);
    e.dedup();
    e
}

/// Gauss points and weights on `[a, b]`, split at `cuts`.
fn split_rule(a: f64, b: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let rule = gauss_legendre(X_NODES);
    let mut out = Vec::new();
    for seg in pts.windows(2) {
        let hp = (seg[1] - seg[0]) / X_SUB as f64;
        for k in 0..X_SUB {
            let c = seg[0] + (k as f64 + 0.5) * hp;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((c + 0.5 * hp * t, 0.5 * hp * w));
            }
        }
    }
    out
}

/// Contribution of pairs `x in Omega`, `y in [b, b + t_len]` (right) or
/// `[a - t_len, a]` (left) written in polar coordinates `r = |x - y|`,
/// `w = dist(x, edge) / r`: returns `int_0^{L+T} r^m nu(r) S(r) dr` where
/// `S(r) = int_w g(x, y, r) dw`.
pub(crate) fn cross_polar(
    kernel: &KernelSpec,
    omega: (f64, f64),
    t_len: f64,
    m: f64,
    edges: &[f64],
    g: &(dyn Fn(f64, f64, f64) -> f64 + Sync),
) -> Result<f64> {
    let (a, b) = omega;
    let l = b - a;
    let side = |right: bool| -> Result<f64> {
        let s = |r: f64| -> f64 {
            if r == 0.0 {
                return 0.0;
            }
            let w0 = (1.0 - t_len / r).max(0.0);
            let w1 = (l / r).min(1.0);
            if w1 <= w0 {
                return 0.0;
            }
            let breaks: Vec<f64> = edges
                .iter()
                .flat_map(|&e| {
                    if right {
                        [(b - e) / r, 1.0 - (e - b) / r]
                    } else {
                        [(e - a) / r, 1.0 - (a - e) / r]
                    }
                })
                .collect();
            let point = |w: f64| {
                let (x, y) = if right {
                    (b - r * w, b + r * (1.0 - w))
                } else {
                    (a + r * w, a - r * (1.0 - w))
                };
                g(x, y, r)
            };
            adaptive(point, w0, w1, &breaks, inner_tol()).unwrap_or(f64::NAN)
        };
        let v = kernel.integrate_moment(m, &s, 0.0, l + t_len, &[l, t_len, DIRECT_DIFF_RADIUS])?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NonlocalError::QuadratureNonConvergence("cross-term inner integral".into()))
        }
    };
    Ok(side(true)? + side(false)?)
}

/// Each term of the Green–Gauss identity computed on its own: the operator
/// side through pointwise `L`, the form and flux through double integrals.
/// `u` and `v` must vanish outside `[a - collar, b + collar]`; `v` may
/// instead be constant.
pub fn green_gauss_terms(
    kernel: &KernelSpec,
    omega: (f64, f64),
    u: &ScalarField,
    v: &ScalarField,
    collar: f64,
) -> Result<GreenGaussTerms> {
    let (a, b) = omega;
    if !(b > a) {
        return Err(NonlocalError::DegenerateInterval { a, b });
    }
    if !(collar > 0.0) {
        return Err(NonlocalError::Domain(format!("collar {collar} must be positive")));
    }
    if u.regularity() != Regularity::C2Bounded || !u.has_derivatives() {
        return Err(NonlocalError::Regularity("u must be C2 with known derivatives".into()));
    }
    let (t_lo, t_hi) = (a - collar, b + collar);
    let inside = |f: &ScalarField| {
        f.support_hull()
            .is_some_and(|(lo, hi)| lo >= t_lo - 1e-12 && hi <= t_hi + 1e-12)
    };
    if u.as_constant().is_some() {
        return Ok(GreenGaussTerms {
            operator_side: 0.0,
            energy: 0.0,
            flux: 0.0,
        });
    }
    if !inside(u) {
        return Err(NonlocalError::Domain("u must vanish outside the collar".into()));
    }
    let v_const = v.as_constant();
    if v_const.is_none() && !inside(v) {
        return Err(NonlocalError::Domain(
            "v must vanish outside the collar or be constant".into(),
        ));
    }
    let edges = feature_points(&[u, v]);

    let points = split_rule(a, b, &edges);
    let operator_side = points
        .par_iter()
        .map(|&(x, w)| Ok(w * apply_l(kernel, u, x)? * v.eval(x)))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();

    let l = b - a;
    // 1/2 int int_{Omega x Omega} = int_0^L nu(r) r^2 int_a^{b-r} Du Dv dx dr
    let inner = |r: f64| -> f64 {
        if r >= l {
            return 0.0;
        }
        let breaks: Vec<f64> = edges.iter().flat_map(|&e| [e, e - r]).collect();
        adaptive(
            |x| difference_quotient(u, x, r) * difference_quotient(v, x, r),
            a,
            b - r,
            &breaks,
            inner_tol(),
        )
        .unwrap_or(f64::NAN)
    };
    let self_part = kernel.integrate_moment(2.0, &inner, 0.0, l, &[DIRECT_DIFF_RADIUS])?;
    let cross = cross_polar(kernel, omega, collar, 3.0, &edges, &|x, y, r| {
        let lo = x.min(y);
        difference_quotient(u, lo, r) * difference_quotient(v, lo, r)
    })?;
    let beyond = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let mut acc = 0.0;
        for &(x, w) in &points {
            acc += w * f(x) * (kernel.tail(t_hi - x)? + kernel.tail(x - t_lo)?);
        }
        Ok(acc)
    };
    let energy_far = match v_const {
        Some(_) => 0.0,
        None => beyond(&|x| u.eval(x) * v.eval(x))?,
    };
    let energy = self_part + cross + energy_far;
    if !energy.is_finite() {
        return Err(NonlocalError::QuadratureNonConvergence("energy double integral".into()));
    }

    let flux_near = cross_polar(kernel, omega, collar, 2.0, &edges, &|x, y, r| {
        let lo = x.min(y);
        let du = difference_quotient(u, lo, r);
        let sign = if y > x { -1.0 } else { 1.0 };
        sign * du * v.eval(y)
    })?;
    let flux_far = match v_const {
        Some(c) => c * beyond(&|x| u.eval(x))?,
        None => 0.0,
    };
    Ok(GreenGaussTerms {
        operator_side,
        energy,
        flux: flux_near + flux_far,
    })
}

/// `|int_Omega (Lu) v - E(u, v) - int_{Omega^c} (Nu) v|`.
pub fn green_gauss_residual(
    kernel: &KernelSpec,
    omega: (f64, f64),
    u: &ScalarField,
    v: &ScalarField,
    collar: f64,
) -> Result<f64> {
    Ok(green_gauss_terms(kernel, omega, u, v, collar)?.residual())
}

/// `int_lo^hi (Nu)(y) v(y) dy` for a complement interval, by direct
/// quadrature of pointwise `N`. Used for cross-checks.
pub fn flux_integral(
    kernel: &KernelSpec,
    omega: (f64, f64),
    u: &ScalarField,
    v: &ScalarField,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let (a, b) = omega;
    let edge = if lo >= b { b } else { a };
    let span = hi - lo;
    // graded substitution toward the edge of Omega
    let q = 3.0;
    let err = std::sync::Mutex::new(None);
    let f = |t: f64| -> f64 {
        let d = span * t.powf(q);
        let y = if edge == b { b + d } else { a - d };
        let jac = span * q * t.powf(q - 1.0);
        match apply_n_at_distance(kernel, omega, u, edge == b, d) {
            Ok(n) => n * v.eval(y) * jac,
            Err(e) => {
                *err.lock().expect("poisoned") = Some(e);
                0.0
            }
        }
    };
    let val = integrate_gl_composite(f, 0.0, 1.0, 20, 32);
    match err.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FunctionSpec;
    use crate::kernels::{make_kernel, KernelParams, Normalization};
    use approx::assert_relative_eq;

    fn frac(alpha: f64, n: Normalization) -> KernelSpec {
        make_kernel(&KernelParams::Fractional {
            alpha,
            normalization: n,
            factor: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let u = FunctionSpec::Constant { value: 3.0 }.build().unwrap();
        let k = frac(1.0, Normalization::ExactC);
        assert_eq!(apply_l(&k, &u, 0.3).unwrap(), 0.0);
        assert_eq!(apply_n(&k, (0.0, 1.0), &u, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn cosine_eigenfunction() {
        let k = frac(1.0, Normalization::ExactC);
        let u = FunctionSpec::Cos { freq: 1.0, amp: 1.0, phase: 0.0 }.build().unwrap();
        assert_relative_eq!(apply_l(&k, &u, 0.0).unwrap(), 1.0, max_relative = 1e-8);
        for a in [0.5, 1.3] {
            let k = frac(a, Normalization::ExactC);
            let u = FunctionSpec::Cos { freq: 2.0, amp: 1.0, phase: 0.4 }.build().unwrap();
            let x = 0.7;
            let expect = 2f64.powf(a) * u.eval(x);
            assert_relative_eq!(apply_l(&k, &u, x).unwrap(), expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn getoor_torsion_constant() {
        // (-Delta)^s (1 - x^2)_+^s = 2^{2s} Gamma(1+s) Gamma(1/2+s) / Gamma(1/2)
        use crate::special::gamma;
        for s in [0.25, 0.5, 0.75] {
            let k = frac(2.0 * s, Normalization::ExactC);
            let u = FunctionSpec::Getoor { s, center: 0.0, radius: 1.0, amp: 1.0 }
                .build()
                .unwrap();
            let expect = 4f64.powf(s) * gamma(1.0 + s).unwrap() * gamma(0.5 + s).unwrap()
                / gamma(0.5).unwrap();
            for x in [0.0, 0.3, -0.6] {
                let got = apply_l(&k, &u, x).unwrap();
                assert_relative_eq!(got, expect, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn normal_derivative_examples() {
        let k = frac(1.0, Normalization::Unnormalized);
        let x = FunctionSpec::Monomial { power: 1, coef: 1.0 }.build().unwrap();
        let x2 = FunctionSpec::Monomial { power: 2, coef: 1.0 }.build().unwrap();
        assert_relative_eq!(
            apply_n(&k, (0.0, 1.0), &x, 2.0).unwrap(),
            -std::f64::consts::LN_2,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            apply_n(&k, (0.0, 1.0), &x2, -1.0).unwrap(),
            1.0 - 2.0 * std::f64::consts::LN_2,
            max_relative = 1e-12
        );
        assert!(matches!(
            apply_n(&k, (0.0, 1.0), &x, 1.0),
            Err(NonlocalError::SingularEvaluation(_))
        ));
    }

    #[test]
    fn p1_fields_rejected() {
        let k = frac(1.0, Normalization::ExactC);
        let t = ScalarField::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(apply_l(&k, &t, 0.5), Err(NonlocalError::Regularity(_))));
    }

    #[test]
    fn green_gauss_two_bumps() {
        let k = frac(0.8, Normalization::ExactC);
        let u = FunctionSpec::Bump { center: 0.6, radius: 0.9, amp: 1.0 }.build().unwrap();
        let v = FunctionSpec::Bump { center: 0.2, radius: 0.7, amp: 1.0 }.build().unwrap();
        let t = green_gauss_terms(&k, (0.0, 1.0), &u, &v, 1.0).unwrap();
        assert!(t.residual() < 1e-6, "{t:?}");
        assert!(t.flux.abs() > 1e-3);
    }

    #[test]
    fn flux_routes_agree() {
        // complement flux by pointwise N against the polar double integral
        let k = frac(0.8, Normalization::ExactC);
        let u = FunctionSpec::Bump { center: 0.5, radius: 0.8, amp: 1.0 }.build().unwrap();
        let v = FunctionSpec::Bump { center: 1.1, radius: 0.4, amp: 1.0 }.build().unwrap();
        let t = green_gauss_terms(&k, (0.0, 1.0), &u, &v, 1.0).unwrap();
        let direct = flux_integral(&k, (0.0, 1.0), &u, &v, 1.0, 1.5).unwrap();
        assert_relative_eq!(t.flux, direct, max_relative = 1e-7);
    }
}

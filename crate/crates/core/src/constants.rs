//! Closed-form constants built from the Gamma function: the fractional
//! Laplacian norming constant, the spherical-average constant governing
//! seminorm limits, unit-sphere areas and the printed Riesz-potential constant.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{NonlocalError, Result};
use crate::quadrature::{integrate_gl_composite, integrate_weighted_at_zero};
use crate::special::{gamma, gamma_pos};

/// Euler Gamma; fails at non-positive integers.
pub fn gamma_fn(x: f64) -> Result<f64> {
    gamma(x)
}

fn check_dim(d: u32) -> Result<()> {
    if d == 0 {
        return Err(NonlocalError::Domain("dimension must be >= 1".into()));
    }
    Ok(())
}

/// Surface measure of the unit sphere `S^{d-1}`: `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: u32) -> Result<f64> {
    check_dim(d)?;
    let h = d as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma_pos(h))
}

/// `C_{d,alpha}` making the symbol of `C |h|^{-d-alpha}` equal to `|xi|^alpha`.
pub fn frac_norming_constant(d: u32, alpha: f64) -> Result<f64> {
    check_dim(d)?;
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NonlocalError::Domain(format!(
            "alpha = {alpha} must lie in (0, 2)"
        )));
    }
    let df = d as f64;
    Ok(2f64.powf(alpha) * gamma_pos(0.5 * (df + alpha))
        / (PI.powf(0.5 * df) * gamma(-0.5 * alpha)?.abs()))
}

/// `a_{d,alpha} = alpha (2 - alpha) / (2 |S^{d-1}|)`, the constant that makes
/// `a |h|^{-d-alpha}` integrate `1 ∧ |h|^2` to one.
pub fn stable_constant(d: u32, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NonlocalError::Domain(format!(
            "alpha = {alpha} must lie in (0, 2)"
        )));
    }
    Ok(alpha * (2.0 - alpha) / (2.0 * sphere_area(d)?))
}

/// Spherical average of `|w . e|^p`:
/// `Gamma(d/2) Gamma((p+1)/2) / (Gamma(1/2) Gamma((p+d)/2))`.
pub fn bbm_constant(d: u32, p: f64) -> Result<f64> {
    check_dim(d)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(NonlocalError::Domain(format!("p = {p} must be >= 1")));
    }
    let df = d as f64;
    Ok(gamma_pos(0.5 * df) * gamma_pos(0.5 * (p + 1.0))
        / (gamma_pos(0.5) * gamma_pos(0.5 * (p + df))))
}

/// Riesz-potential constant exactly as printed in the source text:
/// `pi^{d/2 - a} Gamma(d/2) / Gamma((d - a)/2)`.
///
/// This differs from the textbook Riesz constant, which also carries
/// `Gamma(a/2)` and `2^a` factors. It is reproduced verbatim, not corrected.
pub fn riesz_constant(d: u32, a: f64) -> Result<f64> {
    check_dim(d)?;
    let df = d as f64;
    if !(a > 0.0 && a < df) {
        return Err(NonlocalError::Domain(format!("a = {a} must lie in (0, {d})")));
    }
    Ok(PI.powf(0.5 * df - a) * gamma_pos(0.5 * df) / gamma_pos(0.5 * (df - a)))
}

/// Quadrature value of `int_R (1 - cos t) |t|^{-1-alpha} dt`, i.e. `C_{1,alpha}^{-1}`.
///
/// Gauss–Jacobi on `(0, 1]`, panels of half a period up to `R = 2 pi N`, and a
/// two-term asymptotic expansion of the oscillatory remainder beyond `R`.
pub fn frac_norming_integral_1d(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NonlocalError::Domain(format!(
            "alpha = {alpha} must lie in (0, 2)"
        )));
    }
    // (1 - cos t) / t^2 = 2 sin^2(t/2) / t^2 is smooth
    let near = integrate_weighted_at_zero(
        |t| {
            if t == 0.0 {
                0.5
            } else {
                let s = (0.5 * t).sin();
                2.0 * s * s / (t * t)
            }
        },
        1.0,
        1.0 - alpha,
        30,
    );
    let periods = 40usize;
    let r = 2.0 * PI * periods as f64;
    let mid = integrate_gl_composite(
        |t| {
            let s = (0.5 * t).sin();
            2.0 * s * s * t.powf(-1.0 - alpha)
        },
        1.0,
        r,
        20,
        2 * periods + 1,
    );
    // int_R^inf t^{-1-a} dt - int_R^inf cos t t^{-1-a} dt, with cos R = 1, sin R = 0
    let d1 = -(1.0 + alpha) * r.powf(-2.0 - alpha);
    let d3 = -(1.0 + alpha) * (2.0 + alpha) * (3.0 + alpha) * r.powf(-4.0 - alpha);
    let tail = r.powf(-alpha) / alpha - (-d1 + d3);
    Ok(2.0 * (near + mid + tail))
}

/// Named constant with its optional quadrature cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantReport {
    pub name: String,
    pub d: u32,
    pub parameter: f64,
    pub value: f64,
    pub quadrature_value: Option<f64>,
    pub abs_gap: Option<f64>,
}

impl ConstantReport {
    fn new(name: &str, d: u32, parameter: f64, value: f64, quadrature: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            d,
            parameter,
            value,
            quadrature_value: quadrature,
            abs_gap: quadrature.map(|q| (value - q).abs()),
        }
    }
}

/// Every constant applicable at `(d, alpha)`; the norming constant gets its
/// quadrature check in one dimension (reported as `C` vs `1 / quadrature`).
pub fn constants_report(d: u32, alpha: f64, p: f64) -> Result<Vec<ConstantReport>> {
    let c = frac_norming_constant(d, alpha)?;
    let quad = if d == 1 {
        Some(1.0 / frac_norming_integral_1d(alpha)?)
    } else {
        None
    };
    let mut out = vec![
        ConstantReport::new("C_d_alpha", d, alpha, c, quad),
        ConstantReport::new("a_d_alpha", d, alpha, stable_constant(d, alpha)?, None),
        ConstantReport::new("K_d_p", d, p, bbm_constant(d, p)?, None),
        ConstantReport::new("sphere_area", d, d as f64, sphere_area(d)?, None),
    ];
    if alpha < d as f64 {
        out.push(ConstantReport::new(
            "gamma_d_a",
            d,
            alpha,
            riesz_constant(d, alpha)?,
            None,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norming_constant_examples() {
        assert_relative_eq!(frac_norming_constant(1, 1.0).unwrap(), 1.0 / PI, max_relative = 1e-13);
        assert!(frac_norming_constant(1, 2.0).is_err());
        assert!(frac_norming_constant(1, 0.0).is_err());
    }

    #[test]
    fn norming_constant_endpoint_asymptotics() {
        for d in 1..=3u32 {
            let w = sphere_area(d).unwrap();
            let ratio = |s: f64| frac_norming_constant(d, 2.0 * s).unwrap() / (s * (1.0 - s));
            assert_relative_eq!(ratio(1e-4), 2.0 / w, max_relative = 1e-3);
            assert_relative_eq!(ratio(1.0 - 1e-4), 4.0 * d as f64 / w, max_relative = 1e-3);
        }
    }

    #[test]
    fn norming_constant_matches_quadrature() {
        for k in 1..=7 {
            let alpha = 0.25 * k as f64;
            let c = frac_norming_constant(1, alpha).unwrap();
            let q = frac_norming_integral_1d(alpha).unwrap();
            assert!((1.0 / c - q).abs() * c <= 1e-8, "alpha={alpha}: 1/C={} quad={q}", 1.0 / c);
        }
    }

    #[test]
    fn bbm_constant_examples() {
        assert_relative_eq!(bbm_constant(1, 2.0).unwrap(), 1.0, max_relative = 1e-14);
        for d in 1..=4u32 {
            assert_relative_eq!(bbm_constant(d, 2.0).unwrap() * d as f64, 1.0, max_relative = 1e-12);
        }
        for d in 1..=4u32 {
            for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
                let k = bbm_constant(d, p).unwrap();
                assert!(k > 0.0 && k <= 1.0 + 1e-15);
            }
        }
        assert!(bbm_constant(1, 0.5).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI, max_relative = 1e-14);
        assert!(sphere_area(0).is_err());
    }

    #[test]
    fn riesz_constant_printed_form() {
        assert_relative_eq!(riesz_constant(2, 1.0).unwrap(), 1.0 / PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(riesz_constant(3, 1.0).unwrap(), PI / 2.0, max_relative = 1e-13);
        // pi^{-1/2} Gamma(3/2) / Gamma(1/2) = 1 / (2 sqrt(pi))
        assert_relative_eq!(riesz_constant(3, 2.0).unwrap(), 0.5 / PI.sqrt(), max_relative = 1e-13);
        assert!(riesz_constant(1, 1.0).is_err());
    }

    #[test]
    fn stable_constant_example() {
        assert_relative_eq!(stable_constant(1, 1.0).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn report_contains_gap() {
        let r = constants_report(1, 1.0, 2.0).unwrap();
        let c = &r[0];
        assert!(c.abs_gap.unwrap() < 1e-8);
        assert_eq!(r.len(), 4);
    }
}

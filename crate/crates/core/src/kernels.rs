//! Radial symmetric Lévy kernels on the line and the Dirac-approximating
//! families built from them.
//!
//! Every kernel exposes its density `nu(r)`, `r = |h| > 0`, a singular exponent
//! `sigma` with `nu(r) ~ r^{-1-sigma}` near the origin, the radii where the
//! density stops being smooth, and the one-sided tail mass
//! `int_R^inf nu(r) dr`. Radial integrals split at those radii and use
//! Gauss–Jacobi nodes against `r^{m-1-sigma}` on the innermost piece.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{frac_norming_constant, sphere_area, stable_constant};
use crate::error::{NonlocalError, Result};
use crate::quadrature::{adaptive, integrate_weighted_at_zero, Tolerance};

/// Normalization of the fractional kernel `c |h|^{-1-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `c = C_{1,alpha}`: the fractional Laplacian.
    ExactC,
    /// `c = a_{1,alpha} = alpha (2 - alpha) / 4`: unit Lévy mass.
    StableA,
    /// `c = C_{1,alpha} / 2`.
    HalfC,
    /// `c = 1`.
    Unnormalized,
}

/// Serializable kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelParams {
    Fractional {
        alpha: f64,
        normalization: Normalization,
        #[serde(default = "one")]
        factor: f64,
    },
    /// `(1 + beta) / (2 eps^{1+beta}) |h|^{beta-p} 1_{|h| <= eps}`.
    Window {
        beta: f64,
        eps: f64,
        #[serde(default = "two")]
        p: f64,
    },
    /// `1 / (2 log(eps0/eps)) |h|^{-1-p} 1_{eps < |h| <= eps0}`.
    LogWindow {
        eps: f64,
        eps0: f64,
        #[serde(default = "two")]
        p: f64,
    },
    /// Three-regime rescaling of a base kernel.
    Rescaled { base: Box<KernelParams>, eps: f64 },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

/// Radial density supplied by the caller.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `nu(r) ~ r^{-1-sigma}` near zero; use `-1` for bounded densities.
    pub sigma: f64,
    /// Density vanishes beyond this radius.
    pub support: f64,
    pub nonincreasing: bool,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("sigma", &self.sigma)
            .field("support", &self.support)
            .finish()
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Power { c: f64, alpha: f64 },
    Window { c: f64, beta: f64, eps: f64 },
    LogWindow { c: f64, eps: f64, eps0: f64 },
    Rescaled { base: Box<KernelSpec>, eps: f64 },
    Custom(CustomDensity),
}

/// A validated, immutable radial kernel.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    params: Option<KernelParams>,
    shape: Shape,
    p: f64,
    factor: f64,
}

const NEAR_NODES: usize = 30;

fn quad_tol() -> Tolerance {
    Tolerance {
        abs: 1e-15,
        rel: 1e-13,
        max_intervals: 6000,
    }
}

/// Build a kernel from parameters, checking admissibility and p-Lévy
/// integrability.
pub fn make_kernel(params: &KernelParams) -> Result<KernelSpec> {
    let k = build(params)?;
    let mass = k.levy_integral()?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(NonlocalError::NonLevy(format!("Levy mass {mass}")));
    }
    Ok(k)
}

fn build(params: &KernelParams) -> Result<KernelSpec> {
    let (shape, p, factor) = match params {
        KernelParams::Fractional {
            alpha,
            normalization,
            factor,
        } => {
            let alpha = *alpha;
            if !(alpha > 0.0 && alpha < 2.0) {
                return Err(NonlocalError::Domain(format!(
                    "fractional order alpha = {alpha} must lie in (0, 2)"
                )));
            }
            let c = match normalization {
                Normalization::ExactC => frac_norming_constant(1, alpha)?,
                Normalization::StableA => stable_constant(1, alpha)?,
                Normalization::HalfC => 0.5 * frac_norming_constant(1, alpha)?,
                Normalization::Unnormalized => 1.0,
            };
            if !(*factor > 0.0 && factor.is_finite()) {
                return Err(NonlocalError::Domain(format!("factor {factor} must be positive")));
            }
            (Shape::Power { c, alpha }, 2.0, *factor)
        }
        KernelParams::Window { beta, eps, p } => {
            if !(*beta > -1.0) || !(*eps > 0.0 && *eps < 1.0) || !(*p >= 1.0) {
                return Err(NonlocalError::Domain(format!(
                    "window kernel needs beta > -1, 0 < eps < 1, p >= 1 (got {beta}, {eps}, {p})"
                )));
            }
            let c = (1.0 + beta) / (sphere_area(1)? * eps.powf(1.0 + beta));
            (Shape::Window { c, beta: *beta, eps: *eps }, *p, 1.0)
        }
        KernelParams::LogWindow { eps, eps0, p } => {
            if !(*eps > 0.0 && eps < eps0 && *eps0 < 1.0) || !(*p >= 1.0) {
                return Err(NonlocalError::Domain(format!(
                    "log window needs 0 < eps < eps0 < 1 (got {eps}, {eps0})"
                )));
            }
            let c = 1.0 / (sphere_area(1)? * (eps0 / eps).ln());
            (Shape::LogWindow { c, eps: *eps, eps0: *eps0 }, *p, 1.0)
        }
        KernelParams::Rescaled { base, eps } => {
            if !(*eps > 0.0 && *eps <= 1.0) {
                return Err(NonlocalError::Domain(format!("rescaling eps = {eps} must lie in (0, 1]")));
            }
            let b = build(base)?;
            let p = b.p;
            (Shape::Rescaled { base: Box::new(b), eps: *eps }, p, 1.0)
        }
    };
    Ok(KernelSpec {
        params: Some(params.clone()),
        shape,
        p,
        factor,
    })
}

impl KernelSpec {
    /// Kernel from a caller-supplied density with compact support.
    pub fn custom(custom: CustomDensity, p: f64) -> Result<Self> {
        if !(custom.support > 0.0) || !(custom.sigma < p) {
            return Err(NonlocalError::Domain(format!(
                "custom kernel needs positive support and sigma < p (got {}, {})",
                custom.support, custom.sigma
            )));
        }
        let k = KernelSpec {
            params: None,
            shape: Shape::Custom(custom),
            p,
            factor: 1.0,
        };
        let mass = k.levy_integral()?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(NonlocalError::NonLevy(format!("Levy mass {mass}")));
        }
        Ok(k)
    }

    /// Same kernel multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut k = self.clone();
        k.factor *= s;
        if let Some(KernelParams::Fractional { factor, .. }) = k.params.as_mut() {
            *factor *= s;
        } else {
            k.params = None;
        }
        k
    }

    pub fn params(&self) -> Option<&KernelParams> {
        self.params.as_ref()
    }

    /// Integrability order `p` of `1 ∧ |h|^p`.
    pub fn p_order(&self) -> f64 {
        self.p
    }

    /// Fractional order when the kernel is a pure power law.
    pub fn alpha(&self) -> Option<f64> {
        match &self.shape {
            Shape::Power { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// `sigma` with `nu(r) ~ r^{-1-sigma}` as `r -> 0`.
    pub fn singular_exponent(&self) -> f64 {
        match &self.shape {
            Shape::Power { alpha, .. } => *alpha,
            Shape::Window { beta, .. } => self.p - beta - 1.0,
            Shape::LogWindow { .. } => -1.0,
            Shape::Rescaled { base, .. } => base.singular_exponent(),
            Shape::Custom(c) => c.sigma,
        }
    }

    /// `nu(h)` for `h != 0` (radial).
    pub fn density(&self, h: f64) -> f64 {
        self.factor * self.shape_density(h.abs())
    }

    fn shape_density(&self, r: f64) -> f64 {
        if r == 0.0 {
            return f64::INFINITY;
        }
        match &self.shape {
            Shape::Power { c, alpha } => c * r.powf(-1.0 - alpha),
            Shape::Window { c, beta, eps } => {
                if r <= *eps {
                    c * r.powf(beta - self.p)
                } else {
                    0.0
                }
            }
            Shape::LogWindow { c, eps, eps0 } => {
                if r > *eps && r <= *eps0 {
                    c * r.powf(-1.0 - self.p)
                } else {
                    0.0
                }
            }
            Shape::Rescaled { base, eps } => {
                let q = r / eps;
                let b = base.density(q);
                if r <= *eps {
                    eps.powf(-1.0 - self.p) * b
                } else if r <= 1.0 {
                    r.powf(-self.p) * b / eps
                } else {
                    b / eps
                }
            }
            Shape::Custom(c) => {
                if r <= c.support {
                    (c.density)(r)
                } else {
                    0.0
                }
            }
        }
    }

    /// Radii where the density is not smooth, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.shape {
            Shape::Power { .. } => vec![],
            Shape::Window { eps, .. } => vec![*eps],
            Shape::LogWindow { eps, eps0, .. } => vec![*eps, *eps0],
            Shape::Rescaled { base, eps } => {
                let mut v: Vec<f64> = base.breakpoints().iter().map(|x| x * eps).collect();
                v.push(*eps);
                v.push(1.0);
                v
            }
            Shape::Custom(c) => vec![c.support],
        };
        b.retain(|x| *x > 0.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Radius beyond which the density vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.shape {
            Shape::Power { .. } => None,
            Shape::Window { eps, .. } => Some(*eps),
            Shape::LogWindow { eps0, .. } => Some(*eps0),
            Shape::Rescaled { base, eps } => base.support_radius().map(|s| s * eps),
            Shape::Custom(c) => Some(c.support),
        }
    }

    /// Whether `r -> nu(r)` is non-increasing on `(0, inf)`.
    pub fn is_radially_nonincreasing(&self) -> bool {
        match &self.shape {
            Shape::Power { .. } => true,
            Shape::Window { beta, .. } => *beta <= self.p,
            Shape::LogWindow { .. } => false,
            Shape::Rescaled { base, .. } => base.is_radially_nonincreasing(),
            Shape::Custom(c) => c.nonincreasing,
        }
    }

    /// `r^{1+sigma} nu(r)`, smooth on the innermost piece.
    fn near_factor(&self, r: f64) -> f64 {
        match &self.shape {
            Shape::Power { c, .. } => self.factor * c,
            _ => self.density(r) * r.powf(1.0 + self.singular_exponent()),
        }
    }

    /// `int_lo^hi r^m s(r) nu(r) dr` with `s` smooth; `lo = 0` triggers the
    /// singular treatment. `hi` must be finite.
    pub(crate) fn integrate_moment(
        &self,
        m: f64,
        s: &(dyn Fn(f64) -> f64 + Sync),
        lo: f64,
        hi: f64,
        extra_breaks: &[f64],
    ) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let mut breaks = self.breakpoints();
        breaks.extend_from_slice(extra_breaks);
        breaks.retain(|&b| b > lo && b < hi);
        breaks.sort_by(f64::total_cmp);
        let mut total = 0.0;
        let mut start = lo;
        if lo == 0.0 {
            let r0 = breaks.first().copied().unwrap_or(hi).min(hi).min(1.0);
            let gamma = m - 1.0 - self.singular_exponent();
            if gamma <= -1.0 {
                return Err(NonlocalError::NonLevy(format!(
                    "r^{m} nu(r) is not integrable at the origin (sigma = {})",
                    self.singular_exponent()
                )));
            }
            total += integrate_weighted_at_zero(
                |r| s(r) * self.near_factor(r),
                r0,
                gamma,
                NEAR_NODES,
            );
            start = r0;
        }
        if start < hi {
            total += adaptive(
                |r| r.powf(m) * s(r) * self.density(r),
                start,
                hi,
                &breaks,
                quad_tol(),
            )?;
        }
        Ok(total)
    }

    /// One-sided tail mass `int_R^inf nu(r) dr`, `R > 0`.
    pub fn tail(&self, r: f64) -> Result<f64> {
        debug_assert!(r > 0.0);
        let f = self.factor;
        Ok(match &self.shape {
            Shape::Power { c, alpha } => f * c * r.powf(-alpha) / alpha,
            Shape::Window { c, beta, eps } => {
                if r >= *eps {
                    0.0
                } else {
                    let e = beta - self.p + 1.0;
                    if e.abs() < 1e-14 {
                        c * (eps / r).ln()
                    } else {
                        c * (eps.powf(e) - r.powf(e)) / e
                    }
                }
            }
            Shape::LogWindow { c, eps, eps0 } => {
                if r >= *eps0 {
                    0.0
                } else {
                    let lo = r.max(*eps);
                    c * (lo.powf(-self.p) - eps0.powf(-self.p)) / self.p
                }
            }
            Shape::Rescaled { base, eps } => {
                if r >= 1.0 {
                    base.tail(r / eps)?
                } else {
                    self.integrate_moment(0.0, &|_| 1.0, r, 1.0, &[])? + base.tail(1.0 / eps)?
                }
            }
            Shape::Custom(c) => {
                if r >= c.support {
                    0.0
                } else {
                    self.integrate_moment(0.0, &|_| 1.0, r, c.support, &[])?
                }
            }
        })
    }

    /// `k`-th derivative of the density (k = 1 or 3) where the support is
    /// unbounded; used for oscillatory tail expansions.
    pub(crate) fn density_derivative(&self, r: f64, k: u32) -> Result<f64> {
        match &self.shape {
            Shape::Power { c, alpha } => {
                let mut coef = self.factor * c;
                let mut e = -1.0 - alpha;
                for _ in 0..k {
                    coef *= e;
                    e -= 1.0;
                }
                Ok(coef * r.powf(e))
            }
            Shape::Rescaled { base, eps } if r > 1.0 => {
                Ok(eps.powf(-1.0 - k as f64) * base.density_derivative(r / eps, k)?)
            }
            _ => Err(NonlocalError::QuadratureNonConvergence(
                "density derivative unavailable for this kernel".into(),
            )),
        }
    }

    /// `int (1 ∧ |h|^p) nu(h) dh` over the line.
    pub fn levy_integral(&self) -> Result<f64> {
        let near = self.integrate_moment(self.p, &|_| 1.0, 0.0, 1.0, &[])?;
        let v = 2.0 * (near + self.tail(1.0)?);
        if !v.is_finite() || v > 1e300 {
            return Err(NonlocalError::NonLevy(format!("diverging Levy integral {v}")));
        }
        Ok(v)
    }

    /// `int_{|h| >= delta} (1 ∧ |h|^p) nu(h) dh`.
    pub fn concentration_mass(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(NonlocalError::Domain(format!("delta = {delta} must be positive")));
        }
        let mid = if delta < 1.0 {
            self.integrate_moment(self.p, &|_| 1.0, delta, 1.0, &[])?
        } else {
            0.0
        };
        Ok(2.0 * (mid + self.tail(delta.max(1.0))?))
    }

    /// Characteristic exponent `psi(xi) = int (1 - cos(xi h)) nu(h) dh`.
    pub fn symbol(&self, xi: f64) -> Result<f64> {
        let x = xi.abs();
        if x == 0.0 {
            return Ok(0.0);
        }
        let half_period = PI / x;
        let r0 = self
            .breakpoints()
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(1.0 / x)
            .min(1.0);
        let s = move |r: f64| {
            if r == 0.0 {
                0.5 * x * x
            } else {
                let q = (0.5 * x * r).sin();
                2.0 * q * q / (r * r)
            }
        };
        let near = self.integrate_moment(2.0, &s, 0.0, r0, &[])?;
        let last_break = self.breakpoints().last().copied().unwrap_or(0.0);
        let (upper, tail) = match self.support_radius() {
            Some(sr) => (sr, 0.0),
            None => {
                let min_r = (80.0 * half_period).max(50.0 * last_break.max(1.0));
                let periods = (min_r * x / (2.0 * PI)).ceil();
                let big_r = periods * 2.0 * PI / x;
                // int_R^inf (1 - cos) nu = tail(R) - int_R^inf cos(x r) nu(r) dr
                let osc = -self.density_derivative(big_r, 1)? / (x * x)
                    + self.density_derivative(big_r, 3)? / x.powi(4);
                (big_r, self.tail(big_r)? - osc)
            }
        };
        let mut breaks: Vec<f64> = Vec::new();
        let n_panels = ((upper - r0) / half_period).ceil() as usize;
        for k in 1..n_panels.min(200_000) {
            breaks.push(r0 + k as f64 * half_period);
        }
        let far = if upper > r0 {
            adaptive(
                |r| {
                    let q = (0.5 * x * r).sin();
                    2.0 * q * q * self.density(r)
                },
                r0,
                upper,
                &{
                    let mut b = breaks;
                    b.extend(self.breakpoints());
                    b
                },
                quad_tol(),
            )?
        } else {
            0.0
        };
        Ok(2.0 * (near + far + tail))
    }
}

/// Family of kernels indexed by a scalar parameter: `alpha` for fractional
/// families, `eps` for the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    Fractional {
        normalization: Normalization,
        #[serde(default = "one")]
        factor: f64,
    },
    Window {
        beta: f64,
        #[serde(default = "two")]
        p: f64,
    },
    LogWindow {
        eps0: f64,
        #[serde(default = "two")]
        p: f64,
    },
    Rescaled { base: KernelParams },
}

impl KernelFamily {
    pub fn params(&self, t: f64) -> KernelParams {
        match self {
            KernelFamily::Fractional {
                normalization,
                factor,
            } => KernelParams::Fractional {
                alpha: t,
                normalization: *normalization,
                factor: *factor,
            },
            KernelFamily::Window { beta, p } => KernelParams::Window {
                beta: *beta,
                eps: t,
                p: *p,
            },
            KernelFamily::LogWindow { eps0, p } => KernelParams::LogWindow {
                eps: t,
                eps0: *eps0,
                p: *p,
            },
            KernelFamily::Rescaled { base } => KernelParams::Rescaled {
                base: Box::new(base.clone()),
                eps: t,
            },
        }
    }

    pub fn member(&self, t: f64) -> Result<KernelSpec> {
        make_kernel(&self.params(t))
    }

    /// Whether increasing the parameter moves toward the local limit.
    pub fn increasing_is_local(&self) -> bool {
        matches!(self, KernelFamily::Fractional { .. })
    }
}

/// Which weight on the complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `nu_K(x) = essinf_{y in K} nu(x - y)`.
    Essinf,
    /// `int_K 1 ∧ nu(x - y) dy`.
    Integral,
}

/// Complement weight attached to a sub-interval `K` of the domain.
#[derive(Debug, Clone)]
pub struct WeightSpec {
    pub kernel: KernelSpec,
    pub k: (f64, f64),
    pub kind: WeightKind,
}

impl WeightSpec {
    pub fn new(kernel: KernelSpec, k: (f64, f64), kind: WeightKind) -> Result<Self> {
        if !(k.1 > k.0) {
            return Err(NonlocalError::DegenerateInterval { a: k.0, b: k.1 });
        }
        Ok(Self { kernel, k, kind })
    }

    /// Weight value at `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (k0, k1) = self.k;
        match self.kind {
            WeightKind::Essinf => {
                if self.kernel.is_radially_nonincreasing() {
                    let far = (x - k0).abs().max((x - k1).abs());
                    Ok(self.kernel.density(far))
                } else {
                    // Dense sampling; not sharp for kernels with narrow dips.
                    let n = 10_000;
                    let mut m = f64::INFINITY;
                    for i in 0..=n {
                        let y = k0 + (k1 - k0) * i as f64 / n as f64;
                        if y != x {
                            m = m.min(self.kernel.density(x - y));
                        }
                    }
                    Ok(m)
                }
            }
            WeightKind::Integral => {
                let mut breaks = vec![x];
                for b in self.kernel.breakpoints() {
                    breaks.push(x - b);
                    breaks.push(x + b);
                }
                adaptive(
                    |y| {
                        if y == x {
                            1.0
                        } else {
                            self.kernel.density(x - y).min(1.0)
                        }
                    },
                    k0,
                    k1,
                    &breaks,
                    quad_tol(),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn stable_density_value() {
        let k = frac(1.0, Normalization::StableA);
        assert_relative_eq!(k.density(2.0), 0.25 / 4.0, max_relative = 1e-14);
        let k = frac(1.0, Normalization::ExactC);
        assert_relative_eq!(k.density(-0.5), 4.0 / PI, max_relative = 1e-14);
    }

    #[test]
    fn window_density_value() {
        let k = make_kernel(&KernelParams::Window {
            beta: 2.0,
            eps: 0.1,
            p: 2.0,
        })
        .unwrap();
        assert_relative_eq!(k.density(0.05), 1500.0, max_relative = 1e-12);
        assert_eq!(k.density(0.11), 0.0);
        assert_relative_eq!(k.levy_integral().unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn levy_integrals() {
        for a in [0.5, 1.0, 1.5] {
            let k = frac(a, Normalization::StableA);
            assert!((k.levy_integral().unwrap() - 1.0).abs() < 1e-8);
        }
        // int (1 ∧ h^2) h^{-2} dh = 2 (1 + 1)
        let k = frac(1.0, Normalization::Unnormalized);
        assert_relative_eq!(k.levy_integral().unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(make_kernel(&KernelParams::Fractional {
            alpha: 2.0,
            normalization: Normalization::ExactC,
            factor: 1.0
        })
        .is_err());
        assert!(make_kernel(&KernelParams::Window {
            beta: -1.5,
            eps: 0.1,
            p: 2.0
        })
        .is_err());
        let bad = CustomDensity {
            name: "too singular".into(),
            density: Arc::new(|r: f64| r.powf(-3.5)),
            sigma: 2.5,
            support: 1.0,
            nonincreasing: true,
        };
        assert!(KernelSpec::custom(bad, 2.0).is_err());
    }

    #[test]
    fn concentration_examples() {
        let k = frac(1.9, Normalization::StableA);
        let m = k.concentration_mass(0.5).unwrap();
        assert!(m < 0.14, "{m}");
        // delta >= 1: exactly (2 - alpha) delta^{-alpha} / 2
        let m = k.concentration_mass(2.0).unwrap();
        assert_relative_eq!(m, 0.1 * 2f64.powf(-1.9) / 2.0, max_relative = 1e-12);
        let w = make_kernel(&KernelParams::Window {
            beta: 1.0,
            eps: 0.05,
            p: 2.0,
        })
        .unwrap();
        assert_eq!(w.concentration_mass(0.1).unwrap(), 0.0);
    }

    #[test]
    fn symbol_of_fractional_laplacian() {
        for a in [0.5, 1.0, 1.5] {
            let k = frac(a, Normalization::ExactC);
            for xi in [0.5, 1.0, 2.0] {
                let s = k.symbol(xi).unwrap();
                assert_relative_eq!(s, xi.powf(a), max_relative = 1e-6);
            }
        }
        let k = frac(1.5, Normalization::ExactC);
        assert_eq!(k.symbol(0.0).unwrap(), 0.0);
        assert_relative_eq!(k.symbol(2.0).unwrap(), 2f64.powf(1.5), max_relative = 1e-6);
    }

    #[test]
    fn symbol_of_window_kernel() {
        // nu = c 1_{|h|<=eps}: psi = 2c (eps - sin(xi eps)/xi)
        let k = make_kernel(&KernelParams::Window {
            beta: 2.0,
            eps: 0.1,
            p: 2.0,
        })
        .unwrap();
        let xi = 3.0;
        let exact = 2.0 * 1500.0 * (0.1 - (xi * 0.1f64).sin() / xi);
        assert_relative_eq!(k.symbol(xi).unwrap(), exact, max_relative = 1e-10);
    }

    #[test]
    fn weights() {
        let k = frac(1.0, Normalization::Unnormalized);
        let w = WeightSpec::new(k.clone(), (0.4, 0.6), WeightKind::Essinf).unwrap();
        assert_relative_eq!(w.eval(2.0).unwrap(), 1.0 / 1.6 / 1.6, max_relative = 1e-14);
        // grid minimization oracle
        let grid_min = (0..=10_000)
            .map(|i| 0.4 + 0.2 * i as f64 / 10_000.0)
            .map(|y| k.density(2.0 - y))
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(w.eval(2.0).unwrap(), grid_min, max_relative = 1e-12);
        assert_relative_eq!(w.eval(0.5).unwrap(), k.density(0.1), max_relative = 1e-14);
        let wi = WeightSpec::new(k, (0.4, 0.6), WeightKind::Integral).unwrap();
        assert_relative_eq!(wi.eval(2.0).unwrap(), 1.0 / 1.4 - 1.0 / 1.6, max_relative = 1e-10);
        assert!(wi.eval(0.5).unwrap() <= 0.2 + 1e-12);
    }

    #[test]
    fn rescaled_family_keeps_mass() {
        let base = KernelParams::Fractional {
            alpha: 1.0,
            normalization: Normalization::StableA,
            factor: 1.0,
        };
        for eps in [0.5, 0.1, 0.02] {
            let k = make_kernel(&KernelParams::Rescaled {
                base: Box::new(base.clone()),
                eps,
            })
            .unwrap();
            assert!((k.levy_integral().unwrap() - 1.0).abs() < 1e-8, "eps={eps}");
        }
    }
}

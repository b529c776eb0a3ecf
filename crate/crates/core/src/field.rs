//! Scalar test functions on the line with their first two derivatives,
//! support class and kink locations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NonlocalError, Result};

/// Value and first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    fn scale(self, c: f64) -> Jet {
        Jet {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    C2Bounded,
    AnalyticTest,
    P1Discrete,
}

/// Where a field lives; drives far-field treatment in the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// Zero outside `[lo, hi]`.
    Compact { lo: f64, hi: f64 },
    /// Below double precision outside `[lo, hi]`.
    Decaying { lo: f64, hi: f64 },
    /// `A cos(xi x + phase)`; `xi = 0` is a constant.
    Periodic { xi: f64 },
    /// Anything else.
    Global,
}

impl Support {
    pub fn hull(&self) -> Option<(f64, f64)> {
        match *self {
            Support::Compact { lo, hi } | Support::Decaying { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }
}

type JetFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

/// One summand of a field.
#[derive(Clone)]
pub struct Part {
    pub jet: JetFn,
    pub support: Support,
    pub kinks: Vec<f64>,
    pub regularity: Regularity,
    /// Whether `d1`/`d2` are meaningful away from kinks.
    pub has_derivatives: bool,
}

/// A real function on the line, stored as a sum of parts.
#[derive(Clone)]
pub struct ScalarField {
    parts: Vec<Part>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("parts", &self.parts.len())
            .field("regularity", &self.regularity())
            .finish()
    }
}

impl ScalarField {
    pub fn from_part(part: Part) -> Self {
        Self { parts: vec![part] }
    }

    /// Field from a closure returning value and derivatives.
    pub fn from_jet<F>(f: F, support: Support, kinks: Vec<f64>, regularity: Regularity) -> Self
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        Self::from_part(Part {
            jet: Arc::new(f),
            support,
            kinks,
            regularity,
            has_derivatives: true,
        })
    }

    /// Field from a plain closure; derivatives are unavailable.
    pub fn from_fn<F>(f: F, support: Support, kinks: Vec<f64>, regularity: Regularity) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_part(Part {
            jet: Arc::new(move |x| Jet {
                v: f(x),
                d1: f64::NAN,
                d2: f64::NAN,
            }),
            support,
            kinks,
            regularity,
            has_derivatives: false,
        })
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| (p.jet)(x).v).sum()
    }

    pub fn jet(&self, x: f64) -> Jet {
        self.parts.iter().fold(Jet::default(), |acc, p| {
            let j = (p.jet)(x);
            Jet {
                v: acc.v + j.v,
                d1: acc.d1 + j.d1,
                d2: acc.d2 + j.d2,
            }
        })
    }

    pub fn has_derivatives(&self) -> bool {
        self.parts.iter().all(|p| p.has_derivatives)
    }

    /// Least regular class among the parts.
    pub fn regularity(&self) -> Regularity {
        self.parts
            .iter()
            .map(|p| p.regularity)
            .max()
            .unwrap_or(Regularity::C2Bounded)
    }

    pub fn kinks(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.parts.iter().flat_map(|p| p.kinks.clone()).collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// Smallest interval outside which every part vanishes, if one exists.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.parts {
            let (l, h) = p.support.hull()?;
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Some((lo, hi))
    }

    /// Constant value when every part is constant.
    pub fn as_constant(&self) -> Option<f64> {
        let mut c = 0.0;
        for p in &self.parts {
            match p.support {
                Support::Periodic { xi: 0.0 } => c += (p.jet)(0.0).v,
                _ => return None,
            }
        }
        Some(c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, other: ScalarField) -> Self {
        self.parts.extend(other.parts);
        self
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            parts: self
                .parts
                .into_iter()
                .map(|p| {
                    let f = p.jet.clone();
                    Part {
                        jet: Arc::new(move |x| f(x).scale(c)),
                        ..p
                    }
                })
                .collect(),
        }
    }

    /// `x -> u(x - t)`.
    pub fn shift(self, t: f64) -> Self {
        Self {
            parts: self
                .parts
                .into_iter()
                .map(|p| {
                    let f = p.jet.clone();
                    let support = match p.support {
                        Support::Compact { lo, hi } => Support::Compact {
                            lo: lo + t,
                            hi: hi + t,
                        },
                        Support::Decaying { lo, hi } => Support::Decaying {
                            lo: lo + t,
                            hi: hi + t,
                        },
                        s => s,
                    };
                    Part {
                        jet: Arc::new(move |x| f(x - t)),
                        support,
                        kinks: p.kinks.iter().map(|k| k + t).collect(),
                        ..p
                    }
                })
                .collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Self {
        let mut parts = Vec::new();
        for p in &self.parts {
            for q in &other.parts {
                let (f, g) = (p.jet.clone(), q.jet.clone());
                let support = match (p.support, q.support) {
                    (Support::Periodic { xi }, s) | (s, Support::Periodic { xi }) if xi == 0.0 => s,
                    (Support::Compact { lo, hi }, Support::Compact { lo: l2, hi: h2 }) => {
                        Support::Compact {
                            lo: lo.max(l2),
                            hi: hi.min(h2).max(lo.max(l2)),
                        }
                    }
                    (Support::Compact { lo, hi }, _) | (_, Support::Compact { lo, hi }) => {
                        Support::Compact { lo, hi }
                    }
                    (Support::Decaying { lo, hi }, _) | (_, Support::Decaying { lo, hi }) => {
                        Support::Decaying { lo, hi }
                    }
                    _ => Support::Global,
                };
                let mut kinks = p.kinks.clone();
                kinks.extend_from_slice(&q.kinks);
                parts.push(Part {
                    jet: Arc::new(move |x| {
                        let a = f(x);
                        let b = g(x);
                        Jet {
                            v: a.v * b.v,
                            d1: a.d1 * b.v + a.v * b.d1,
                            d2: a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2,
                        }
                    }),
                    support,
                    kinks,
                    regularity: p.regularity.max(q.regularity),
                    has_derivatives: p.has_derivatives && q.has_derivatives,
                });
            }
        }
        Self { parts }
    }

    /// Piecewise-linear interpolant through `(xs, ys)`, zero outside.
    pub fn piecewise_linear(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(NonlocalError::Domain("table needs matching x/y of length >= 2".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NonlocalError::Domain("table abscissae must increase".into()));
        }
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let kinks = xs.clone();
        let xs = Arc::new(xs);
        let ys = Arc::new(ys);
        Ok(Self::from_part(Part {
            jet: Arc::new(move |x| {
                if x < lo || x > hi {
                    return Jet::default();
                }
                let i = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[i - 1], xs[i]);
                let slope = (ys[i] - ys[i - 1]) / (x1 - x0);
                Jet {
                    v: ys[i - 1] + slope * (x - x0),
                    d1: slope,
                    d2: 0.0,
                }
            }),
            support: Support::Compact { lo, hi },
            kinks,
            regularity: Regularity::P1Discrete,
            has_derivatives: true,
        }))
    }
}

/// Built-in function catalog, keyed by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// `coef * x^power`.
    Monomial {
        power: u32,
        #[serde(default = "one")]
        coef: f64,
    },
    /// `amp * sin(freq x + phase)`.
    Sin {
        freq: f64,
        #[serde(default = "one")]
        amp: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * cos(freq x + phase)`.
    Cos {
        freq: f64,
        #[serde(default = "one")]
        amp: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * exp(-((x - center)/width)^2)`.
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `amp * exp(-1/(1 - t^2))`, `t = (x - center)/radius`, zero for `|t| >= 1`.
    Bump {
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `amp * (1 - t^2)_+^s`, `t = (x - center)/radius`.
    Getoor {
        s: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// Piecewise-linear table, zero outside its range.
    Table { x: Vec<f64>, y: Vec<f64> },
    Sum { terms: Vec<FunctionSpec> },
    Product { factors: Vec<FunctionSpec> },
    Scaled { coef: f64, of: Box<FunctionSpec> },
    /// `x -> of(x - by)`.
    Shift { by: f64, of: Box<FunctionSpec> },
}

fn one() -> f64 {
    1.0
}

const GAUSSIAN_CUTOFF: f64 = 7.0;

impl FunctionSpec {
    pub fn build(&self) -> Result<ScalarField> {
        Ok(match self {
            FunctionSpec::Constant { value } => {
                let c = *value;
                ScalarField::from_jet(
                    move |_| Jet { v: c, d1: 0.0, d2: 0.0 },
                    Support::Periodic { xi: 0.0 },
                    vec![],
                    Regularity::C2Bounded,
                )
            }
            FunctionSpec::Monomial { power, coef } => {
                let (k, c) = (*power as i32, *coef);
                let kf = k as f64;
                ScalarField::from_jet(
                    move |x| Jet {
                        v: c * x.powi(k),
                        d1: if k >= 1 { c * kf * x.powi(k - 1) } else { 0.0 },
                        d2: if k >= 2 {
                            c * kf * (kf - 1.0) * x.powi(k - 2)
                        } else {
                            0.0
                        },
                    },
                    if k == 0 {
                        Support::Periodic { xi: 0.0 }
                    } else {
                        Support::Global
                    },
                    vec![],
                    Regularity::C2Bounded,
                )
            }
            FunctionSpec::Sin { freq, amp, phase } => {
                FunctionSpec::Cos {
                    freq: *freq,
                    amp: *amp,
                    phase: phase - std::f64::consts::FRAC_PI_2,
                }
                .build()?
            }
            FunctionSpec::Cos { freq, amp, phase } => {
                let (w, a, ph) = (*freq, *amp, *phase);
                ScalarField::from_jet(
                    move |x| {
                        let (s, c) = (w * x + ph).sin_cos();
                        Jet {
                            v: a * c,
                            d1: -a * w * s,
                            d2: -a * w * w * c,
                        }
                    },
                    Support::Periodic { xi: w.abs() },
                    vec![],
                    Regularity::C2Bounded,
                )
            }
            FunctionSpec::Gaussian { center, width, amp } => {
                let (c, w, a) = (*center, *width, *amp);
                if !(w > 0.0) {
                    return Err(NonlocalError::Domain(format!("gaussian width {w} must be positive")));
                }
                ScalarField::from_jet(
                    move |x| {
                        let t = (x - c) / w;
                        let e = a * (-t * t).exp();
                        Jet {
                            v: e,
                            d1: -2.0 * t / w * e,
                            d2: (4.0 * t * t - 2.0) / (w * w) * e,
                        }
                    },
                    Support::Decaying {
                        lo: c - GAUSSIAN_CUTOFF * w,
                        hi: c + GAUSSIAN_CUTOFF * w,
                    },
                    vec![],
                    Regularity::C2Bounded,
                )
            }
            FunctionSpec::Bump { center, radius, amp } => {
                let (c, r, a) = (*center, *radius, *amp);
                if !(r > 0.0) {
                    return Err(NonlocalError::Domain(format!("bump radius {r} must be positive")));
                }
                ScalarField::from_jet(
                    move |x| {
                        let t = (x - c) / r;
                        if t.abs() >= 1.0 {
                            return Jet::default();
                        }
                        let q = 1.0 - t * t;
                        let e = a * (-1.0 / q).exp();
                        Jet {
                            v: e,
                            d1: e * (-2.0 * t / (q * q)) / r,
                            d2: e * (6.0 * t.powi(4) - 2.0) / q.powi(4) / (r * r),
                        }
                    },
                    Support::Compact { lo: c - r, hi: c + r },
                    vec![],
                    Regularity::C2Bounded,
                )
            }
            FunctionSpec::Getoor { s, center, radius, amp } => {
                let (s, c, r, a) = (*s, *center, *radius, *amp);
                if !(s > 0.0) || !(r > 0.0) {
                    return Err(NonlocalError::Domain("getoor profile needs s > 0, radius > 0".into()));
                }
                ScalarField::from_jet(
                    move |x| {
                        let t = (x - c) / r;
                        if t.abs() >= 1.0 {
                            return Jet::default();
                        }
                        let q = 1.0 - t * t;
                        let v = a * q.powf(s);
                        let dq = -2.0 * t / r;
                        let ddq = -2.0 / (r * r);
                        Jet {
                            v,
                            d1: a * s * q.powf(s - 1.0) * dq,
                            d2: a * s * ((s - 1.0) * q.powf(s - 2.0) * dq * dq + q.powf(s - 1.0) * ddq),
                        }
                    },
                    Support::Compact { lo: c - r, hi: c + r },
                    vec![c - r, c + r],
                    Regularity::AnalyticTest,
                )
            }
            FunctionSpec::Table { x, y } => ScalarField::piecewise_linear(x.clone(), y.clone())?,
            FunctionSpec::Sum { terms } => {
                let mut it = terms.iter();
                let first = it
                    .next()
                    .ok_or_else(|| NonlocalError::Domain("empty sum".into()))?
                    .build()?;
                it.try_fold(first, |acc, t| Ok::<_, NonlocalError>(acc.add(t.build()?)))?
            }
            FunctionSpec::Product { factors } => {
                let mut it = factors.iter();
                let first = it
                    .next()
                    .ok_or_else(|| NonlocalError::Domain("empty product".into()))?
                    .build()?;
                it.try_fold(first, |acc, t| Ok::<_, NonlocalError>(acc.mul(&t.build()?)))?
            }
            FunctionSpec::Scaled { coef, of } => of.build()?.scale(*coef),
            FunctionSpec::Shift { by, of } => of.build()?.shift(*by),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_check(u: &ScalarField, x: f64) {
        let h = 1e-4;
        let j = u.jet(x);
        let d1 = (u.eval(x + h) - u.eval(x - h)) / (2.0 * h);
        let d2 = (u.eval(x + h) - 2.0 * u.eval(x) + u.eval(x - h)) / (h * h);
        assert!((j.d1 - d1).abs() < 1e-6 * (1.0 + d1.abs()), "d1 {} vs {}", j.d1, d1);
        assert!((j.d2 - d2).abs() < 1e-4 * (1.0 + d2.abs()), "d2 {} vs {}", j.d2, d2);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = [
            FunctionSpec::Monomial { power: 3, coef: 2.0 },
            FunctionSpec::Sin { freq: 3.0, amp: 1.5, phase: 0.2 },
            FunctionSpec::Gaussian { center: 0.3, width: 0.7, amp: 1.0 },
            FunctionSpec::Bump { center: 0.5, radius: 0.8, amp: 2.0 },
            FunctionSpec::Getoor { s: 0.5, center: 0.0, radius: 1.0, amp: 1.0 },
            FunctionSpec::Product {
                factors: vec![
                    FunctionSpec::Sin { freq: std::f64::consts::PI, amp: 1.0, phase: 0.0 },
                    FunctionSpec::Bump { center: 0.5, radius: 1.0, amp: 1.0 },
                ],
            },
        ];
        for s in &specs {
            let u = s.build().unwrap();
            for x in [-0.4, 0.1, 0.45, 0.7] {
                fd_check(&u, x);
            }
        }
    }

    #[test]
    fn supports_and_shift() {
        let u = FunctionSpec::Bump { center: 0.0, radius: 1.0, amp: 1.0 }
            .build()
            .unwrap()
            .shift(2.0);
        assert_eq!(u.support_hull(), Some((1.0, 3.0)));
        assert_relative_eq!(u.eval(2.0), (-1.0f64).exp());
        assert_eq!(u.eval(0.5), 0.0);
        let c = FunctionSpec::Constant { value: 3.0 }.build().unwrap();
        assert_eq!(c.as_constant(), Some(3.0));
        assert!(u.as_constant().is_none());
    }

    #[test]
    fn table_interpolates() {
        let t = ScalarField::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_relative_eq!(t.eval(0.5), 1.0);
        assert_relative_eq!(t.eval(1.5), 1.0);
        assert_eq!(t.eval(2.5), 0.0);
        assert_eq!(t.regularity(), Regularity::P1Discrete);
    }

    #[test]
    fn config_round_trip() {
        let s: FunctionSpec = serde_json::from_str(r#"{"name":"sin","freq":3.0}"#).unwrap();
        assert_eq!(s, FunctionSpec::Sin { freq: 3.0, amp: 1.0, phase: 0.0 });
        assert!(serde_json::from_str::<FunctionSpec>(r#"{"name":"sin","freq":3.0,"bogus":1}"#).is_err());
    }
}

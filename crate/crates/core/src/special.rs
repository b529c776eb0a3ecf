//! Euler Gamma function.
//!
//! Lanczos approximation (g = 10.900511, 11 terms, Pugh 2004) with the
//! reflection formula below 1/2.

use std::f64::consts::{E, PI};

use crate::error::{NonlocalError, Result};

const TWO_SQRT_E_OVER_PI: f64 = 1.860_382_734_205_265_7;
const GAMMA_R: f64 = 10.900511;
const GAMMA_DK: [f64; 11] = [
    2.485_740_891_387_535_5e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_5,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412e-2,
    -5.719_261_174_043_057e-4,
    4.633_994_733_599_057e-6,
    -2.719_949_084_886_077_2e-9,
];

fn lanczos_sum(shift: impl Fn(f64) -> f64) -> f64 {
    GAMMA_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(GAMMA_DK[0], |s, (k, d)| s + d / shift(k as f64))
}

/// Gamma function for any real argument that is not a non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(NonlocalError::Domain(format!("gamma({x})")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(NonlocalError::GammaPole(x));
    }
    if x < 0.5 {
        // Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        let s = lanczos_sum(|k| k - x);
        let y = 1.0 - x;
        let g1mx = s * TWO_SQRT_E_OVER_PI * ((y - 0.5 + GAMMA_R) / E).powf(y - 0.5);
        Ok(PI / (sin_pi(x) * g1mx))
    } else {
        let s = lanczos_sum(|k| x + k - 1.0);
        Ok(s * TWO_SQRT_E_OVER_PI * ((x - 0.5 + GAMMA_R) / E).powf(x - 0.5))
    }
}

/// `sin(pi x)` with exact argument reduction, accurate near the integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let k = x.round();
    let r = x - k;
    let s = (PI * r).sin();
    if (k as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// Gamma for arguments known to be admissible (positive, finite).
pub(crate) fn gamma_pos(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    gamma(x).expect("positive argument")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma(-1.5).unwrap(), 4.0 * PI.sqrt() / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn poles_are_rejected() {
        for x in [0.0, -1.0, -7.0] {
            assert_eq!(gamma(x), Err(NonlocalError::GammaPole(x)));
        }
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn half_integer_oracle_by_quadrature() {
        // Gamma(1/2) = int_0^inf e^{-t} t^{-1/2} dt = 2 int_0^inf e^{-u^2} du,
        // integrated with an independent composite Simpson rule on [0, 9].
        let n = 20_000;
        let h = 9.0 / n as f64;
        let f = |u: f64| (-u * u).exp();
        let mut s = f(0.0) + f(9.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let quad = 2.0 * s * h / 3.0;
        assert_relative_eq!(gamma(0.5).unwrap(), quad, max_relative = 1e-12);
        // reflection: Gamma(1 - e) = e |Gamma(-e)| at e = 1/2
        assert_relative_eq!(0.5 * gamma(-0.5).unwrap().abs(), quad, max_relative = 1e-12);
    }

    #[test]
    fn recurrence_on_grid() {
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn accurate_up_to_fifty() {
        // 49! = Gamma(50)
        let fact49: f64 = (1..50).map(|k| k as f64).product();
        assert_relative_eq!(gamma(50.0).unwrap(), fact49, max_relative = 1e-12);
        assert_relative_eq!(gamma(1e-3).unwrap(), 999.423_772_484_595_5, max_relative = 1e-12);
    }
}

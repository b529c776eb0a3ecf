use nonlocal_core::operator::apply_l;
use nonlocal_core::*;
use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

fn frac(alpha: f64) -> KernelSpec {
    make_kernel(&KernelParams::Fractional {
        alpha,
        normalization: Normalization::ExactC,
        factor: 1.0,
    })
    .unwrap()
}

/// `zeta(-a)` for `a > 0` by reflection from `zeta(1 + a)`.
fn zeta_negative(a: f64) -> f64 {
    let s = 1.0 + a;
    let n = 2000usize;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    let z = head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0;
    2.0 * (2.0 * PI).powf(-s) * (PI * s / 2.0).cos() * special::gamma(s).unwrap() * z
}

/// `(-Delta)^{alpha/2} u (x)` by multiplying the discrete spectrum of `u`
/// on a periodic box by `|xi|^alpha`. The trapezoid sum over `xi` carries
/// an `O(dxi^{1 + alpha})` error from the kink of `|xi|^alpha` at zero;
/// its leading term `2 zeta(-alpha) G(0) dxi^{1 + alpha}` is removed.
fn spectral_oracle(u: impl Fn(f64) -> f64, alpha: f64, x: f64) -> f64 {
    let (lo, hi, n) = (-40.0, 40.0, 1usize << 16);
    let len = hi - lo;
    let dx = len / n as f64;
    let mut data: Vec<Complex<f64>> =
        (0..n).map(|j| Complex::new(u(lo + j as f64 * dx), 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut data);
    let mut sum = 0.0;
    for (k, c) in data.iter().enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = 2.0 * PI * m / len;
        let phase = xi * (x - lo);
        sum += xi.abs().powf(alpha) * (c.re * phase.cos() - c.im * phase.sin());
    }
    let dxi = 2.0 * PI / len;
    let g0 = data[0].re * dx / (2.0 * PI);
    sum / n as f64 - 2.0 * zeta_negative(alpha) * g0 * dxi.powf(1.0 + alpha)
}

#[test]
fn gaussian_matches_fft_oracle() {
    let u = FunctionSpec::Gaussian { center: 0.0, width: 1.0, amp: 1.0 }.build().unwrap();
    let got = apply_l(&frac(1.2), &u, 0.3).unwrap();
    let oracle = spectral_oracle(|x| (-x * x).exp(), 1.2, 0.3);
    assert!(((got - oracle) / oracle).abs() < 1e-4, "{got} vs {oracle}");
}

#[test]
fn window_symbol_on_cosines() {
    let k = make_kernel(&KernelParams::Window { beta: 0.5, eps: 0.7, p: 2.0 }).unwrap();
    for xi in [0.5, 2.0, 5.0] {
        let u = FunctionSpec::Cos { freq: xi, amp: 1.0, phase: 0.3 }.build().unwrap();
        let x = 0.4;
        let expect = k.symbol(xi).unwrap() * u.eval(x);
        let got = apply_l(&k, &u, x).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect.abs().max(1.0), "{xi}: {got} {expect}");
    }
}

fn smooth_field() -> impl Strategy<Value = (FunctionSpec, FunctionSpec)> {
    (-0.5f64..0.5, 0.3f64..1.2, 0.5f64..2.0, -1.0f64..1.0).prop_map(|(c, w, r, ph)| {
        (
            FunctionSpec::Gaussian { center: c, width: w, amp: 1.0 },
            FunctionSpec::Product {
                factors: vec![
                    FunctionSpec::Bump { center: -c, radius: r, amp: 1.0 },
                    FunctionSpec::Sin { freq: 2.0, amp: 1.0, phase: ph },
                ],
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linearity((u, w) in smooth_field(), a in -2.0f64..2.0, b in -2.0f64..2.0,
                 alpha in 0.3f64..1.9, x in -0.8f64..0.8) {
        let k = frac(alpha);
        let combo = FunctionSpec::Sum { terms: vec![
            FunctionSpec::Scaled { coef: a, of: Box::new(u.clone()) },
            FunctionSpec::Scaled { coef: b, of: Box::new(w.clone()) },
        ] }.build().unwrap();
        let lu = apply_l(&k, &u.build().unwrap(), x).unwrap();
        let lw = apply_l(&k, &w.build().unwrap(), x).unwrap();
        let lc = apply_l(&k, &combo, x).unwrap();
        prop_assert!((lc - a * lu - b * lw).abs() < 1e-10 * (1.0 + lu.abs() + lw.abs()),
            "{lc} {lu} {lw}");
    }

    #[test]
    fn translation((u, _) in smooth_field(), t in -1.0f64..1.0,
                   alpha in 0.3f64..1.9, x in -0.8f64..0.8) {
        let k = frac(alpha);
        let shifted = FunctionSpec::Shift { by: t, of: Box::new(u.clone()) }.build().unwrap();
        let a = apply_l(&k, &shifted, x).unwrap();
        let b = apply_l(&k, &u.build().unwrap(), x - t).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} {b}");
    }

    #[test]
    fn symbol_consistency(xi in 0.2f64..4.0, alpha in 0.3f64..1.9, x in -1.0f64..1.0) {
        let k = frac(alpha);
        let u = FunctionSpec::Cos { freq: xi, amp: 1.0, phase: 0.0 }.build().unwrap();
        let lu = apply_l(&k, &u, x).unwrap();
        let expect = k.symbol(xi).unwrap() * (xi * x).cos();
        prop_assert!((lu - expect).abs() < 1e-7 * (1.0 + expect.abs()), "{lu} {expect}");
    }
}

use std::sync::Arc;

use nalgebra::DVector;
use nonlocal_core::assembly::assemble_v_seminorm;
use nonlocal_core::operator::green_gauss_terms;
use nonlocal_core::quadrature::gauss_legendre;
use nonlocal_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frac(alpha: f64, n: Normalization) -> KernelSpec {
    make_kernel(&KernelParams::Fractional {
        alpha,
        normalization: n,
        factor: 1.0,
    })
    .unwrap()
}

/// `int int phi_i(x) phi_j(y) nu(x - y)` by tensor Gauss over the four cell
/// pairs.
fn brute_force_cross(mesh: &Mesh1D, k: &KernelSpec, i: usize, j: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = mesh.h;
    let hat = |node: usize, x: f64| (1.0 - (x - mesh.nodes[node]).abs() / h).max(0.0);
    let mut total = 0.0;
    for ci in [i - 1, i] {
        for cj in [j - 1, j] {
            let (x0, y0) = (mesh.nodes[ci], mesh.nodes[cj]);
            for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
                let x = x0 + 0.5 * (s + 1.0) * h;
                for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let y = y0 + 0.5 * (t + 1.0) * h;
                    total += 0.25 * h * h * ws * wt * hat(i, x) * hat(j, y) * k.density(x - y);
                }
            }
        }
    }
    total
}

#[test]
fn separated_entry_matches_tensor_gauss() {
    let mesh = Arc::new(build_mesh(0.0, 1.0, 16, 0.5).unwrap());
    for alpha in [0.5, 1.0, 1.5] {
        let k = frac(alpha, Normalization::ExactC);
        let order = 16;
        let forms = assemble_forms(mesh.clone(), &k, order, TailMode::Drop).unwrap();
        let (i, j) = (mesh.n_collar + 3, mesh.n_collar + 7);
        let brute = brute_force_cross(&mesh, &k, i, j, 2 * order);
        let e = forms.e[(i, j)];
        assert!(
            ((e + brute) / brute).abs() < 1e-9,
            "alpha {alpha}: {e} vs {}",
            -brute
        );
    }
}

#[test]
fn window_kernel_is_banded_when_support_below_h() {
    let mesh = Arc::new(build_mesh(0.0, 1.0, 10, 0.5).unwrap());
    let k = make_kernel(&KernelParams::Window { beta: 1.0, eps: 0.05, p: 2.0 }).unwrap();
    let forms = assemble_forms(mesh.clone(), &k, 8, TailMode::Drop).unwrap();
    let n = mesh.len();
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) > 2 {
                assert_eq!(forms.e[(i, j)], 0.0);
            }
        }
    }
    let ones = DVector::from_element(n, 1.0);
    assert!((&forms.e * ones).amax() <= 1e-12 * forms.e.amax());
}

#[test]
fn comparability_with_v_seminorm() {
    let mesh = Arc::new(build_mesh(0.0, 1.0, 12, 0.5).unwrap());
    let k = frac(1.2, Normalization::ExactC);
    let forms = assemble_forms(mesh.clone(), &k, 12, TailMode::Drop).unwrap();
    let v = assemble_v_seminorm(&mesh, &k, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let x = DVector::from_fn(mesh.len(), |_, _| rng.random_range(-1.0..1.0));
        let e = (x.transpose() * &forms.e * &x)[(0, 0)];
        let vv = (x.transpose() * &v * &x)[(0, 0)];
        assert!(0.5 * vv <= e * (1.0 + 1e-12) && e <= vv * (1.0 + 1e-12), "{e} {vv}");
    }
}

#[test]
fn discrete_form_converges_to_continuum_form() {
    // E(I_h u, I_h v) against the continuum form of smooth u, v
    let k = frac(1.0, Normalization::ExactC);
    let u = FunctionSpec::Bump { center: 0.5, radius: 0.9, amp: 1.0 }.build().unwrap();
    let v = FunctionSpec::Bump { center: 0.3, radius: 0.8, amp: 1.0 }.build().unwrap();
    let exact = green_gauss_terms(&k, (0.0, 1.0), &u, &v, 1.0).unwrap().energy;
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let mesh = Arc::new(build_mesh(0.0, 1.0, n, 1.0).unwrap());
        let forms = assemble_forms(mesh.clone(), &k, 16, TailMode::DirichletZero).unwrap();
        let uh = DVector::from_vec(mesh.nodes.iter().map(|&x| u.eval(x)).collect());
        let vh = DVector::from_vec(mesh.nodes.iter().map(|&x| v.eval(x)).collect());
        let e = (uh.transpose() * &forms.e * &vh)[(0, 0)];
        errs.push((e - exact).abs());
    }
    assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    assert!(errs[1] / errs[2] > 3.0, "rate too slow: {errs:?}");
}

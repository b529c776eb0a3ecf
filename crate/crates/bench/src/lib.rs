//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use nonlocal_core::{
    assemble_forms, build_mesh, make_kernel, GalerkinForms, KernelParams, KernelSpec, Normalization,
    TailMode,
};

pub fn fractional(alpha: f64) -> KernelSpec {
    make_kernel(&KernelParams::Fractional {
        alpha,
        normalization: Normalization::ExactC,
        factor: 1.0,
    })
    .expect("admissible order")
}

pub fn window(eps: f64) -> KernelSpec {
    make_kernel(&KernelParams::Window { beta: 0.0, eps, p: 2.0 }).expect("admissible window")
}

/// Forms on `(0, 1)` with a half-unit collar.
pub fn unit_forms(kernel: &KernelSpec, n: usize, tail: TailMode) -> GalerkinForms {
    let mesh = Arc::new(build_mesh(0.0, 1.0, n, 0.5).expect("valid mesh"));
    assemble_forms(mesh, kernel, 4, tail).expect("assembly")
}

//! Shared setup for the benchmarks in `benches/`.

use std::sync::Arc;

use semflow_core::gs::GsOp;
use semflow_core::mesh::{gen_box_mesh, BoxSpec};
use semflow_core::{Basis1D, FunctionSpace};

/// Unit cube with `n^3` elements at polynomial order `order`.
pub fn cube(n: usize, order: usize) -> FunctionSpace {
    let mesh = gen_box_mesh(&BoxSpec::unit([n; 3])).expect("box mesh");
    FunctionSpace::new(Arc::new(mesh), Basis1D::new(order).expect("basis")).expect("space")
}

/// Zero on the `x1` face, one elsewhere.
pub fn outflow_mask(s: &FunctionSpace) -> Vec<f64> {
    let mut m = vec![1.0; s.n_local()];
    for f in s.facets().iter().filter(|f| f.tag == "x1") {
        for &p in &f.points {
            m[p] = 0.0;
        }
    }
    s.gs().op(&mut m, GsOp::Min).expect("mask");
    m
}

/// A smooth continuous field.
pub fn smooth(s: &FunctionSpace) -> Vec<f64> {
    s.sample(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[2] * x[2])
}

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semflow_core::gs::GsOp;
use semflow_core::mesh::{gen_box_mesh, gen_cylinder_box_mesh, BoxSpec, CylinderBoxSpec};
use semflow_core::{Basis1D, FunctionSpace, Mesh};

pub fn space(mesh: Mesh, order: usize) -> FunctionSpace {
    FunctionSpace::new(Arc::new(mesh), Basis1D::new(order).unwrap()).unwrap()
}

pub fn unit_box(counts: [usize; 3], order: usize) -> FunctionSpace {
    space(gen_box_mesh(&BoxSpec::unit(counts)).unwrap(), order)
}

/// Box with interior vertices jittered, so metrics are non-constant.
pub fn warped_box(counts: [usize; 3], order: usize, seed: u64) -> FunctionSpace {
    let mut mesh = gen_box_mesh(&BoxSpec::unit(counts)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / *counts.iter().max().unwrap() as f64;
    for v in &mut mesh.vertices {
        for c in v.iter_mut() {
            if *c > 1e-12 && *c < 1.0 - 1e-12 {
                *c += 0.15 * h * (rng.random::<f64>() - 0.5);
            }
        }
    }
    space(mesh, order)
}

pub fn small_cylinder() -> CylinderBoxSpec {
    CylinderBoxSpec {
        diameter: 1.0,
        x: [-1.5, 1.5],
        y: [0.0, 1.0],
        z: [-1.5, 1.5],
        square_half_width: 1.5,
        n_theta: 8,
        n_radial: 1,
        n_vertical: 1,
        n_upstream: 0,
        n_downstream: 0,
        n_side: 0,
        geometry_order: 4,
    }
}

pub fn curved(order: usize) -> FunctionSpace {
    space(gen_cylinder_box_mesh(&small_cylinder()).unwrap(), order)
}

pub fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn random_continuous(s: &FunctionSpace, seed: u64) -> Vec<f64> {
    let mut u = random(s.n_local(), seed);
    s.gs().avg(&mut u).unwrap();
    u
}

/// 0 on every point of a facet carrying one of `tags`, 1 elsewhere.
pub fn mask(s: &FunctionSpace, tags: &[&str]) -> Vec<f64> {
    let mut m = vec![1.0; s.n_local()];
    for f in s.facets() {
        if tags.contains(&f.tag.as_str()) {
            for &p in &f.points {
                m[p] = 0.0;
            }
        }
    }
    s.gs().op(&mut m, GsOp::Min).unwrap();
    m
}

/// Assembled, masked operator from an element-local kernel.
pub fn assembled<'a>(
    s: &'a FunctionSpace,
    mask: &'a [f64],
    kernel: impl Fn(&[f64]) -> Vec<f64> + 'a,
) -> impl FnMut(&[f64], &mut [f64]) + 'a {
    move |u, w| {
        let mut y = kernel(u);
        s.gs().add(&mut y).unwrap();
        for i in 0..w.len() {
            w[i] = y[i] * mask[i];
        }
    }
}

/// Derivative of the j-th Lagrange polynomial through `x` at `t`, from the
/// product formula.
pub fn lagrange_deriv(x: &[f64], j: usize, t: f64) -> f64 {
    let mut total = 0.0;
    for m in 0..x.len() {
        if m == j {
            continue;
        }
        let mut prod = 1.0 / (x[j] - x[m]);
        for k in 0..x.len() {
            if k != j && k != m {
                prod *= (t - x[k]) / (x[j] - x[k]);
            }
        }
        total += prod;
    }
    total
}

pub fn lagrange(x: &[f64], j: usize, t: f64) -> f64 {
    (0..x.len())
        .filter(|&k| k != j)
        .map(|k| (t - x[k]) / (x[j] - x[k]))
        .product()
}

/// Dense stiffness of an axis-aligned box element `[0,hx]x[0,hy]x[0,hz]`,
/// built from basis-function gradients at the GLL quadrature points.
pub fn dense_box_stiffness(basis: &Basis1D, h: [f64; 3]) -> Vec<f64> {
    let x = basis.points();
    let w = basis.weights();
    let n = x.len();
    let npe = n * n * n;
    let jac = h[0] * h[1] * h[2] / 8.0;
    let scale = h.map(|v| 2.0 / v);
    let mut dl = vec![0.0; n * n];
    let mut l = vec![0.0; n * n];
    for a in 0..n {
        for j in 0..n {
            dl[a * n + j] = lagrange_deriv(x, j, x[a]);
            l[a * n + j] = lagrange(x, j, x[a]);
        }
    }
    let mut k = vec![0.0; npe * npe];
    for qa in 0..n {
        for qb in 0..n {
            for qc in 0..n {
                let wq = w[qa] * w[qb] * w[qc] * jac;
                let grads: Vec<[f64; 3]> = (0..npe)
                    .map(|p| {
                        let (i, j, kk) = (p % n, (p / n) % n, p / (n * n));
                        [
                            scale[0] * dl[qa * n + i] * l[qb * n + j] * l[qc * n + kk],
                            scale[1] * l[qa * n + i] * dl[qb * n + j] * l[qc * n + kk],
                            scale[2] * l[qa * n + i] * l[qb * n + j] * dl[qc * n + kk],
                        ]
                    })
                    .collect();
                for p in 0..npe {
                    for q in 0..npe {
                        let g = &grads[p];
                        let f = &grads[q];
                        k[p * npe + q] += wq * (g[0] * f[0] + g[1] * f[1] + g[2] * f[2]);
                    }
                }
            }
        }
    }
    k
}

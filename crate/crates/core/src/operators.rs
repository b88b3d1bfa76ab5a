//! Matrix-free element operators.
//!
//! The weak Laplacian is `w^e = D^T G^e D u^e`, evaluated by sum
//! factorization: three 1D derivative sweeps, a pointwise 3x3 metric
//! contraction, then three transposed sweeps. No operator here applies
//! gather-scatter; the assembled operator is `gs.add` after `ax_*`.

use rayon::prelude::*;

use crate::basis::{gauss_legendre, interp_matrix};
use crate::error::{Error, Result};
use crate::space::{grad_ref, tensor_apply, FunctionSpace};

/// Coefficients of `lambda_visc * K + lambda_mass * B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzCoeffs {
    pub lambda_visc: f64,
    pub lambda_mass: f64,
}

impl HelmholtzCoeffs {
    pub fn new(lambda_visc: f64, lambda_mass: f64) -> Result<Self> {
        if !(lambda_visc > 0.0) || !(lambda_mass >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Helmholtz coefficients need lambda_visc > 0 and lambda_mass >= 0, got ({lambda_visc}, {lambda_mass})"
            )));
        }
        Ok(Self {
            lambda_visc,
            lambda_mass,
        })
    }

    pub fn laplace() -> Self {
        Self {
            lambda_visc: 1.0,
            lambda_mass: 0.0,
        }
    }
}

/// `w += D^T` along each direction, i.e. `w[i] += sum_a D[a][i] f[a]`.
fn add_grad_ref_t(d: &[f64], n: usize, fr: &[f64], fs: &[f64], ft: &[f64], w: &mut [f64]) {
    let nn = n * n;
    for k in 0..n {
        for j in 0..n {
            let row = n * (j + n * k);
            for i in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += d[a * n + i] * fr[row + a];
                }
                w[row + i] += acc;
            }
        }
    }
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += d[b * n + j] * fs[i + n * b + nn * k];
                }
                w[i + n * j + nn * k] += acc;
            }
        }
    }
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += d[c * n + k] * ft[i + n * j + nn * c];
                }
                w[i + n * j + nn * k] += acc;
            }
        }
    }
}

/// Per-element scratch for the Helmholtz kernel.
pub(crate) struct AxScratch {
    ur: Vec<f64>,
    us: Vec<f64>,
    ut: Vec<f64>,
}

impl AxScratch {
    pub(crate) fn new(npe: usize) -> Self {
        Self {
            ur: vec![0.0; npe],
            us: vec![0.0; npe],
            ut: vec![0.0; npe],
        }
    }
}

/// Helmholtz action on one element.
pub(crate) fn ax_element(
    d: &[f64],
    n: usize,
    geom: &[[f64; 6]],
    mass: &[f64],
    coeffs: HelmholtzCoeffs,
    u: &[f64],
    w: &mut [f64],
    s: &mut AxScratch,
) {
    grad_ref(d, n, u, &mut s.ur, &mut s.us, &mut s.ut);
    let lv = coeffs.lambda_visc;
    for p in 0..u.len() {
        let g = &geom[p];
        let (a, b, c) = (s.ur[p], s.us[p], s.ut[p]);
        s.ur[p] = lv * (g[0] * a + g[1] * b + g[2] * c);
        s.us[p] = lv * (g[1] * a + g[3] * b + g[4] * c);
        s.ut[p] = lv * (g[2] * a + g[4] * b + g[5] * c);
    }
    if coeffs.lambda_mass != 0.0 {
        for p in 0..u.len() {
            w[p] = coeffs.lambda_mass * mass[p] * u[p];
        }
    } else {
        w.fill(0.0);
    }
    add_grad_ref_t(d, n, &s.ur, &s.us, &s.ut, w);
}

/// Element-local Helmholtz action written into `w`.
pub fn ax_helmholtz_into(
    space: &FunctionSpace,
    coeffs: HelmholtzCoeffs,
    u: &[f64],
    w: &mut [f64],
) -> Result<()> {
    space.check(u)?;
    space.check(w)?;
    let n = space.n1d();
    let npe = space.points_per_element();
    let d = space.basis().dmat();
    let geom = space.geom();
    let mass = space.mass();
    w.par_chunks_mut(npe)
        .zip(u.par_chunks(npe))
        .enumerate()
        .for_each_init(
            || AxScratch::new(npe),
            |s, (e, (we, ue))| {
                let r = e * npe..(e + 1) * npe;
                ax_element(d, n, &geom[r.clone()], &mass[r], coeffs, ue, we, s);
            },
        );
    Ok(())
}

pub fn ax_helmholtz(space: &FunctionSpace, coeffs: HelmholtzCoeffs, u: &[f64]) -> Result<Vec<f64>> {
    let mut w = space.zeros();
    ax_helmholtz_into(space, coeffs, u, &mut w)?;
    Ok(w)
}

pub fn ax_laplace(space: &FunctionSpace, u: &[f64]) -> Result<Vec<f64>> {
    ax_helmholtz(space, HelmholtzCoeffs::laplace(), u)
}

/// Pointwise physical gradient.
pub fn grad(space: &FunctionSpace, u: &[f64]) -> Result<[Vec<f64>; 3]> {
    space.check(u)?;
    let n = space.n1d();
    let npe = space.points_per_element();
    let d = space.basis().dmat();
    let rx = space.drdx();
    let mut out = [space.zeros(), space.zeros(), space.zeros()];
    let [gx, gy, gz] = &mut out;
    gx.par_chunks_mut(npe)
        .zip(gy.par_chunks_mut(npe))
        .zip(gz.par_chunks_mut(npe))
        .zip(u.par_chunks(npe))
        .enumerate()
        .for_each_init(
            || AxScratch::new(npe),
            |s, (e, (((gx, gy), gz), ue))| {
                grad_ref(d, n, ue, &mut s.ur, &mut s.us, &mut s.ut);
                for p in 0..npe {
                    let m = &rx[e * npe + p];
                    let (a, b, c) = (s.ur[p], s.us[p], s.ut[p]);
                    gx[p] = a * m[0] + b * m[3] + c * m[6];
                    gy[p] = a * m[1] + b * m[4] + c * m[7];
                    gz[p] = a * m[2] + b * m[5] + c * m[8];
                }
            },
        );
    Ok(out)
}

pub fn div(space: &FunctionSpace, v: &[Vec<f64>; 3]) -> Result<Vec<f64>> {
    let mut out = space.zeros();
    for (l, comp) in v.iter().enumerate() {
        let g = grad(space, comp)?;
        for (o, x) in out.iter_mut().zip(&g[l]) {
            *o += x;
        }
    }
    Ok(out)
}

pub fn curl(space: &FunctionSpace, v: &[Vec<f64>; 3]) -> Result<[Vec<f64>; 3]> {
    let gu = grad(space, &v[0])?;
    let gv = grad(space, &v[1])?;
    let gw = grad(space, &v[2])?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    Ok([
        diff(&gw[1], &gv[2]),
        diff(&gu[2], &gw[0]),
        diff(&gv[0], &gu[1]),
    ])
}

/// Weak divergence `w_i = int grad(phi_i) . g`, element-local.
pub fn weak_div(space: &FunctionSpace, g: &[Vec<f64>; 3]) -> Result<Vec<f64>> {
    for c in g {
        space.check(c)?;
    }
    let n = space.n1d();
    let npe = space.points_per_element();
    let d = space.basis().dmat();
    let rx = space.drdx();
    let mass = space.mass();
    let mut w = space.zeros();
    w.par_chunks_mut(npe).enumerate().for_each_init(
        || AxScratch::new(npe),
        |s, (e, we)| {
            for q in 0..npe {
                let p = e * npe + q;
                let m = &rx[p];
                let v = [g[0][p], g[1][p], g[2][p]];
                s.ur[q] = mass[p] * (m[0] * v[0] + m[1] * v[1] + m[2] * v[2]);
                s.us[q] = mass[p] * (m[3] * v[0] + m[4] * v[1] + m[5] * v[2]);
                s.ut[q] = mass[p] * (m[6] * v[0] + m[7] * v[1] + m[8] * v[2]);
            }
            we.fill(0.0);
            add_grad_ref_t(d, n, &s.ur, &s.us, &s.ut, we);
        },
    );
    Ok(w)
}

/// Over-integration data: `3(N+1)/2` Gauss-Legendre points per direction.
#[derive(Debug, Clone)]
pub struct Dealias {
    m: usize,
    /// `m x n` interpolation from GLL to GL points.
    interp: Vec<f64>,
    /// Fine quadrature weight times Jacobian, element-major.
    wjac: Vec<f64>,
}

impl Dealias {
    pub fn new(space: &FunctionSpace) -> Result<Self> {
        let n = space.n1d();
        let m = (3 * n).div_ceil(2);
        let (pts, wts) = gauss_legendre(m)?;
        let interp = interp_matrix(space.basis(), &pts)?;
        let npe = space.points_per_element();
        let mpe = m * m * m;
        let d = space.basis().dmat();
        let coords = space.coords();
        let mut wjac = vec![0.0; space.num_elements() * mpe];
        let mut s = AxScratch::new(npe);
        for e in 0..space.num_elements() {
            // dx_l/dr_s on the fine grid: the coordinate map is degree N, so
            // interpolating its GLL derivatives is exact.
            let mut dx = [
                [Vec::new(), Vec::new(), Vec::new()],
                [Vec::new(), Vec::new(), Vec::new()],
                [Vec::new(), Vec::new(), Vec::new()],
            ];
            for l in 0..3 {
                grad_ref(
                    d,
                    n,
                    &coords[l][e * npe..(e + 1) * npe],
                    &mut s.ur,
                    &mut s.us,
                    &mut s.ut,
                );
                dx[l] = [
                    tensor_apply(&interp, m, n, &s.ur),
                    tensor_apply(&interp, m, n, &s.us),
                    tensor_apply(&interp, m, n, &s.ut),
                ];
            }
            for k in 0..m {
                for j in 0..m {
                    for i in 0..m {
                        let q = i + m * (j + m * k);
                        let a = |l: usize, s: usize| dx[l][s][q];
                        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
                        wjac[e * mpe + q] = wts[i] * wts[j] * wts[k] * det;
                    }
                }
            }
        }
        Ok(Self { m, interp, wjac })
    }

    pub fn points_per_direction(&self) -> usize {
        self.m
    }
}

/// `(v . grad) u` at the GLL points. With dealiasing the product is formed
/// on the fine grid and returned as `B^{-1} J^T W (v . grad u)`, so that
/// `B * advect` is the over-integrated weak form.
pub fn advect(
    space: &FunctionSpace,
    v: &[Vec<f64>; 3],
    u: &[f64],
    dealias: Option<&Dealias>,
) -> Result<Vec<f64>> {
    for c in v {
        space.check(c)?;
    }
    let g = grad(space, u)?;
    let Some(da) = dealias else {
        let mut w = space.zeros();
        for (p, wp) in w.iter_mut().enumerate() {
            *wp = v[0][p] * g[0][p] + v[1][p] * g[1][p] + v[2][p] * g[2][p];
        }
        return Ok(w);
    };
    let n = space.n1d();
    let m = da.m;
    let npe = space.points_per_element();
    let mpe = m * m * m;
    // Transpose of the interpolation matrix, n x m.
    let mut jt = vec![0.0; n * m];
    for i in 0..m {
        for j in 0..n {
            jt[j * m + i] = da.interp[i * n + j];
        }
    }
    let mass = space.mass();
    let mut w = space.zeros();
    w.par_chunks_mut(npe).enumerate().for_each(|(e, we)| {
        let r = e * npe..(e + 1) * npe;
        let mut prod = vec![0.0; mpe];
        for l in 0..3 {
            let vf = tensor_apply(&da.interp, m, n, &v[l][r.clone()]);
            let gf = tensor_apply(&da.interp, m, n, &g[l][r.clone()]);
            for q in 0..mpe {
                prod[q] += vf[q] * gf[q];
            }
        }
        for q in 0..mpe {
            prod[q] *= da.wjac[e * mpe + q];
        }
        let back = tensor_apply(&jt, n, m, &prod);
        for p in 0..npe {
            we[p] = back[p] / mass[e * npe + p];
        }
    });
    Ok(w)
}

/// `dt * max_p sum_s |c_s| / dxi_s`, where `c_s = sum_l (dr_s/dx_l) v_l` is
/// the contravariant velocity and `dxi_s` the reference GLL spacing at the
/// point (forward difference, backward at the last node).
pub fn cfl(space: &FunctionSpace, v: &[Vec<f64>; 3], dt: f64) -> f64 {
    let n = space.n1d();
    let npe = space.points_per_element();
    let basis = space.basis();
    let inv_dxi: Vec<f64> = (0..n).map(|i| 1.0 / basis.spacing(i)).collect();
    let rx = space.drdx();
    let mut max: f64 = 0.0;
    for p in 0..space.n_local() {
        let q = p % npe;
        let idx = [q % n, (q / n) % n, q / (n * n)];
        let m = &rx[p];
        let vel = [v[0][p], v[1][p], v[2][p]];
        let mut sum = 0.0;
        for s in 0..3 {
            let c = m[3 * s] * vel[0] + m[3 * s + 1] * vel[1] + m[3 * s + 2] * vel[2];
            sum += c.abs() * inv_dxi[idx[s]];
        }
        max = max.max(sum);
    }
    dt * max
}

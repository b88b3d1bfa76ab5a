//! Preconditioned CG, right-preconditioned restarted GMRES, and the
//! previous-solution projection space.
//!
//! Vectors live in the element-local layout and are assumed continuous
//! (equal at coincident points). Inner products go through
//! [`GatherScatter::dot`], which counts each global dof once, so the norms
//! reported here are plain 2-norms over global dofs. Operators passed in
//! must already include gather-scatter and the Dirichlet mask.

use crate::error::{Error, Result};
use crate::gs::GatherScatter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub max_iter: usize,
    pub restart_m: usize,
}

impl SolverConfig {
    pub fn new(abs_tol: f64, max_iter: usize, restart_m: usize) -> Result<Self> {
        let c = Self {
            abs_tol,
            max_iter,
            restart_m,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || self.max_iter == 0 || self.restart_m == 0 {
            return Err(Error::InvalidArgument(format!(
                "bad solver config {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub converged: bool,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn apply_mask(mask: &[f64], v: &mut [f64]) {
    for (x, m) in v.iter_mut().zip(mask) {
        *x *= m;
    }
}

/// `b - A x`, masked.
fn residual(
    apply_a: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &[f64],
    mask: &[f64],
    r: &mut [f64],
) {
    apply_a(x, r);
    for i in 0..r.len() {
        r[i] = (b[i] - r[i]) * mask[i];
    }
}

/// Preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit. Hitting `max_iter` is reported through
/// `converged = false`, not as an error.
pub fn pcg(
    apply_a: &mut dyn FnMut(&[f64], &mut [f64]),
    apply_m: &mut dyn FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    mask: &[f64],
    gs: &GatherScatter,
) -> Result<SolveStats> {
    cfg.validate()?;
    let n = rhs.len();
    crate::error::check_len(n, x.len())?;
    crate::error::check_len(n, mask.len())?;
    apply_mask(mask, x);
    let mut r = vec![0.0; n];
    residual(apply_a, rhs, x, mask, &mut r);
    let r0 = gs.dot(&r, &r).sqrt();
    let mut stats = SolveStats {
        initial_residual: r0,
        final_residual: r0,
        ..Default::default()
    };
    if r0 <= cfg.abs_tol {
        stats.converged = true;
        return Ok(stats);
    }
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut rz_old = 1.0;
    for it in 1..=cfg.max_iter {
        apply_m(&r, &mut z);
        apply_mask(mask, &mut z);
        let rz = gs.dot(&r, &z);
        let beta = if it == 1 { 0.0 } else { rz / rz_old };
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz_old = rz;
        apply_a(&p, &mut w);
        apply_mask(mask, &mut w);
        let pap = gs.dot(&p, &w);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                iteration: it,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &w, &mut r);
        let rn = gs.dot(&r, &r).sqrt();
        stats.iterations = it;
        stats.final_residual = rn;
        if rn <= cfg.abs_tol {
            stats.converged = true;
            break;
        }
    }
    residual(apply_a, rhs, x, mask, &mut r);
    stats.final_residual = gs.dot(&r, &r).sqrt();
    Ok(stats)
}

/// Restarted GMRES, right-preconditioned: solves `A M^{-1} y = b` and keeps
/// `z_j = M^{-1} v_j` so the update is `x += Z c` even when `M` is not an
/// exactly linear map.
pub fn gmres(
    apply_a: &mut dyn FnMut(&[f64], &mut [f64]),
    apply_m: &mut dyn FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    mask: &[f64],
    gs: &GatherScatter,
) -> Result<SolveStats> {
    cfg.validate()?;
    let n = rhs.len();
    crate::error::check_len(n, x.len())?;
    crate::error::check_len(n, mask.len())?;
    apply_mask(mask, x);
    let m = cfg.restart_m;
    let mut r = vec![0.0; n];
    residual(apply_a, rhs, x, mask, &mut r);
    let mut beta = gs.dot(&r, &r).sqrt();
    let mut stats = SolveStats {
        initial_residual: beta,
        final_residual: beta,
        ..Default::default()
    };
    if beta <= cfg.abs_tol {
        stats.converged = true;
        return Ok(stats);
    }
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut total = 0;

    'outer: while total < cfg.max_iter {
        v.clear();
        z.clear();
        g.fill(0.0);
        g[0] = beta;
        v.push(r.iter().map(|x| x / beta).collect());
        let mut k = 0;
        let mut done = false;
        while k < m && total < cfg.max_iter {
            let mut zk = vec![0.0; n];
            apply_m(&v[k], &mut zk);
            apply_mask(mask, &mut zk);
            apply_a(&zk, &mut w);
            apply_mask(mask, &mut w);
            z.push(zk);
            let before = gs.dot(&w, &w).sqrt();
            for j in 0..=k {
                let hj = gs.dot(&w, &v[j]);
                h[j][k] = hj;
                axpy(-hj, &v[j], &mut w);
            }
            let mut hn = gs.dot(&w, &w).sqrt();
            if hn < 1e-8 * before {
                // Second Gram-Schmidt pass.
                for j in 0..=k {
                    let c = gs.dot(&w, &v[j]);
                    h[j][k] += c;
                    axpy(-c, &v[j], &mut w);
                }
                hn = gs.dot(&w, &w).sqrt();
            }
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hn * hn).sqrt();
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::GmresBreakdown {
                    iteration: total + 1,
                });
            }
            cs[k] = h[k][k] / denom;
            sn[k] = hn / denom;
            h[k][k] = denom;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            stats.iterations = total;
            stats.final_residual = g[k].abs();
            if g[k].abs() <= cfg.abs_tol || hn <= f64::EPSILON * before {
                done = true;
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // Back substitution on the k x k triangle.
        let mut c = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[i][j] * c[j];
            }
            c[i] = s / h[i][i];
        }
        for (j, cj) in c.iter().enumerate() {
            axpy(*cj, &z[j], x);
        }
        residual(apply_a, rhs, x, mask, &mut r);
        beta = gs.dot(&r, &r).sqrt();
        stats.final_residual = beta;
        if done || beta <= cfg.abs_tol {
            stats.converged = beta <= cfg.abs_tol;
            break 'outer;
        }
    }
    Ok(stats)
}

/// Store of A-orthonormal previous solutions used to build initial guesses.
///
/// The space is cleared before an append when it is full or when
/// `reset_interval` appends have happened since the last clear.
#[derive(Debug, Clone)]
pub struct ProjectionSpace {
    capacity: usize,
    reset_interval: usize,
    xs: Vec<Vec<f64>>,
    axs: Vec<Vec<f64>>,
    steps_since_reset: usize,
}

impl ProjectionSpace {
    pub fn new(capacity: usize) -> Self {
        Self::with_reset(capacity, 20)
    }

    pub fn with_reset(capacity: usize, reset_interval: usize) -> Self {
        Self {
            capacity,
            reset_interval,
            xs: Vec::new(),
            axs: Vec::new(),
            steps_since_reset: 0,
        }
    }

    /// Rebuilds a space from stored vectors, e.g. when restarting.
    pub fn from_parts(
        capacity: usize,
        reset_interval: usize,
        xs: Vec<Vec<f64>>,
        axs: Vec<Vec<f64>>,
        steps_since_reset: usize,
    ) -> Result<Self> {
        if xs.len() != axs.len() || xs.len() > capacity {
            return Err(Error::InvalidArgument(
                "inconsistent projection vectors".into(),
            ));
        }
        Ok(Self {
            capacity,
            reset_interval,
            xs,
            axs,
            steps_since_reset,
        })
    }

    pub fn reset_interval(&self) -> usize {
        self.reset_interval
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn steps_since_reset(&self) -> usize {
        self.steps_since_reset
    }

    /// Drops all stored vectors; call whenever the operator changes.
    pub fn invalidate(&mut self) {
        self.xs.clear();
        self.axs.clear();
        self.steps_since_reset = 0;
    }

    pub fn basis(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.xs, &self.axs)
    }

    /// Returns the projected guess `x = sum <x_k, b> x_k` and deflates `rhs`
    /// to `b - A x` in place.
    pub fn project_pre(&self, rhs: &mut [f64], gs: &GatherScatter) -> Vec<f64> {
        let mut guess = vec![0.0; rhs.len()];
        let alphas: Vec<f64> = self.xs.iter().map(|xk| gs.dot(xk, rhs)).collect();
        for (k, a) in alphas.iter().enumerate() {
            axpy(*a, &self.xs[k], &mut guess);
            axpy(-*a, &self.axs[k], rhs);
        }
        guess
    }

    /// A-orthonormalizes `x_new` against the stored vectors and appends it.
    pub fn project_post(
        &mut self,
        x_new: &[f64],
        apply_a: &mut dyn FnMut(&[f64], &mut [f64]),
        gs: &GatherScatter,
    ) {
        if self.capacity == 0 {
            return;
        }
        self.steps_since_reset += 1;
        if self.xs.len() >= self.capacity || self.steps_since_reset > self.reset_interval {
            self.invalidate();
            self.steps_since_reset = 1;
        }
        let mut x = x_new.to_vec();
        let mut ax = vec![0.0; x.len()];
        apply_a(&x, &mut ax);
        let norm0 = gs.dot(&x, &ax).max(0.0).sqrt();
        if norm0 == 0.0 {
            return;
        }
        for _ in 0..2 {
            for k in 0..self.xs.len() {
                let c = gs.dot(&ax, &self.xs[k]);
                axpy(-c, &self.xs[k], &mut x);
                axpy(-c, &self.axs[k], &mut ax);
            }
        }
        let norm = gs.dot(&x, &ax);
        if !(norm > 1e-14 * norm0 * norm0) {
            return;
        }
        let s = 1.0 / norm.sqrt();
        x.iter_mut().for_each(|v| *v *= s);
        ax.iter_mut().for_each(|v| *v *= s);
        self.xs.push(x);
        self.axs.push(ax);
    }
}

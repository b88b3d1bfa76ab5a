//! Integral diagnostics: surface forces, divergence and energy norms, and
//! streaming statistics.

use crate::error::{Error, Result};
use crate::operators::{div, grad};
use crate::space::FunctionSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceOptions {
    /// Dynamic viscosity (`nu` with unit density).
    pub mu: f64,
    /// Use `mu (du_i/dx_j + du_j/dx_i)` instead of `mu du_i/dx_j`.
    pub symmetric_stress: bool,
    /// Report the force on an immersed body, whose outward normal is the
    /// negative of the domain's.
    pub on_body: bool,
}

/// Force integral and coefficients. `drag` and `lift` are the `x` and `z`
/// components of the total force over `norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceRecord {
    pub time: f64,
    pub pressure: [f64; 3],
    pub viscous: [f64; 3],
    pub norm: f64,
}

impl ForceRecord {
    pub fn total(&self) -> [f64; 3] {
        [0, 1, 2].map(|c| self.pressure[c] + self.viscous[c])
    }

    pub fn drag(&self) -> f64 {
        self.total()[0] / self.norm
    }

    pub fn lift(&self) -> f64 {
        self.total()[2] / self.norm
    }
}

/// `0.5 rho u_cl^2 h D` with `rho = 1`.
pub fn force_normalization(u_cl: f64, h: f64, diameter: f64) -> f64 {
    0.5 * u_cl * u_cl * h * diameter
}

/// `int_S (-p n + tau n) dA` over facets tagged `tag`, `n` the outward
/// normal of the fluid domain (negated when `opts.on_body`).
pub fn surface_force(
    space: &FunctionSpace,
    tag: &str,
    p: &[f64],
    v: &[Vec<f64>; 3],
    opts: ForceOptions,
    time: f64,
    norm: f64,
) -> Result<ForceRecord> {
    space.check(p)?;
    if space.facets_with_tag(tag).next().is_none() {
        return Err(Error::UnknownTag(tag.to_string()));
    }
    let g = [
        grad(space, &v[0])?,
        grad(space, &v[1])?,
        grad(space, &v[2])?,
    ];
    let sign = if opts.on_body { -1.0 } else { 1.0 };
    let mut fp = [0.0; 3];
    let mut fv = [0.0; 3];
    for f in space.facets_with_tag(tag) {
        for (q, &pt) in f.points.iter().enumerate() {
            let n = f.normals[q].map(|c| sign * c);
            let a = f.area[q];
            for i in 0..3 {
                fp[i] -= p[pt] * n[i] * a;
                let mut tn = 0.0;
                for j in 0..3 {
                    let mut tij = g[i][j][pt];
                    if opts.symmetric_stress {
                        tij += g[j][i][pt];
                    }
                    tn += opts.mu * tij * n[j];
                }
                fv[i] += tn * a;
            }
        }
    }
    Ok(ForceRecord {
        time,
        pressure: fp,
        viscous: fv,
        norm,
    })
}

/// `||div v||_{L2}` by GLL quadrature.
pub fn divergence_norm(space: &FunctionSpace, v: &[Vec<f64>; 3]) -> Result<f64> {
    let d = div(space, v)?;
    Ok(space
        .integrate(&d.iter().map(|x| x * x).collect::<Vec<_>>())
        .sqrt())
}

/// `0.5 int |v|^2`.
pub fn kinetic_energy(space: &FunctionSpace, v: &[Vec<f64>; 3]) -> Result<f64> {
    for c in v {
        space.check(c)?;
    }
    let e: Vec<f64> = (0..space.n_local())
        .map(|p| v[0][p].powi(2) + v[1][p].powi(2) + v[2][p].powi(2))
        .collect();
    Ok(0.5 * space.integrate(&e))
}

/// RMS of `f` over points whose distance `dist(x)` falls in
/// `[k w, (k + 1) w)` for `k = 0..count`; `NaN` for empty shells.
pub fn shell_rms(
    space: &FunctionSpace,
    f: &[f64],
    dist: impl Fn([f64; 3]) -> f64,
    width: f64,
    count: usize,
) -> Vec<f64> {
    let mut sum = vec![0.0; count];
    let mut n = vec![0usize; count];
    for (p, v) in f.iter().enumerate() {
        let k = (dist(space.point(p)) / width).floor();
        if k >= 0.0 && (k as usize) < count {
            sum[k as usize] += v * v;
            n[k as usize] += 1;
        }
    }
    sum.iter()
        .zip(&n)
        .map(|(s, &n)| (s / n as f64).sqrt())
        .collect()
}

/// Welford running mean and sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (divides by `n - 1`); zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

//! Closed-form flows used for verification.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::basis::Basis1D;
use crate::bc::{BcKind, BoundarySet, DirichletFn};
use crate::diagnostics::shell_rms;
use crate::error::Result;
use crate::mesh::{gen_box_mesh, BoxSpec};
use crate::operators::div;
use crate::space::FunctionSpace;
use crate::timestep::{scheme_coeffs, FlowParams, Stepper};

/// Decaying 2D Taylor-Green vortex, `u = sin x cos y F`, `v = -cos x sin y F`,
/// `F = exp(-2 nu t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorGreen {
    pub nu: f64,
}

impl TaylorGreen {
    pub fn velocity(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let f = (-2.0 * self.nu * t).exp();
        [
            x[0].sin() * x[1].cos() * f,
            -x[0].cos() * x[1].sin() * f,
            0.0,
        ]
    }

    pub fn pressure(&self, x: [f64; 3], t: f64) -> f64 {
        ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) / 4.0 * (-4.0 * self.nu * t).exp()
    }

    pub fn sample_velocity(&self, space: &FunctionSpace, t: f64) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|c| space.sample(|x| self.velocity(x, t)[c]))
    }

    pub fn sample_pressure(&self, space: &FunctionSpace, t: f64) -> Vec<f64> {
        space.sample(|x| self.pressure(x, t))
    }

    /// `[0, pi/2]^2 x [0, pi/8]` with `n x n x 1` elements, analytic
    /// Dirichlet data on the `x` and `y` sides and symmetry in `z`.
    pub fn setup(&self, n: usize, order: usize) -> Result<(Arc<FunctionSpace>, BoundarySet)> {
        let spec = BoxSpec {
            extent: [[0.0, PI / 2.0], [0.0, PI / 2.0], [0.0, PI / 8.0]],
            counts: [n, n, 1],
            tags: ["side", "side", "side", "side", "span", "span"].map(String::from),
        };
        let space = Arc::new(FunctionSpace::new(
            Arc::new(gen_box_mesh(&spec)?),
            Basis1D::new(order)?,
        )?);
        let tg = *self;
        let f: DirichletFn = Arc::new(move |x, t| tg.velocity(x, t));
        let kinds = BTreeMap::from([
            ("side".to_string(), BcKind::Function(f)),
            ("span".to_string(), BcKind::Symmetry),
        ]);
        let bcs = BoundarySet::new(&space, kinds)?;
        Ok((space, bcs))
    }
}

/// `max |a - b|` and the `L2` norm of `a - b` over all components.
pub fn field_error(space: &FunctionSpace, a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> (f64, f64) {
    let mut linf: f64 = 0.0;
    let mut sq = space.zeros();
    for c in 0..3 {
        for (p, s) in sq.iter_mut().enumerate() {
            let d = a[c][p] - b[c][p];
            linf = linf.max(d.abs());
            *s += d * d;
        }
    }
    (linf, space.integrate(&sq).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorGreenRun {
    pub dt: f64,
    pub steps: usize,
    pub l2_error: f64,
    pub linf_error: f64,
    pub divergence: f64,
    /// RMS pointwise divergence in shells of width `sqrt(gamma0 nu dt)`
    /// from the Dirichlet sides, nearest first.
    pub shells: Vec<f64>,
    pub pressure_iterations: usize,
}

/// Runs the Taylor-Green case to `t_end` from exact history (no startup
/// ramp) for each `dt`.
pub fn taylor_green_study(
    tg: TaylorGreen,
    elements: usize,
    order: usize,
    t_end: f64,
    dts: &[f64],
    configure: impl Fn(&mut FlowParams),
) -> Result<Vec<TaylorGreenRun>> {
    let mut out = Vec::new();
    for &dt in dts {
        let (space, bcs) = tg.setup(elements, order)?;
        let mut params = FlowParams::new(tg.nu, dt);
        configure(&mut params);
        let mut stepper = Stepper::new(Arc::clone(&space), bcs, params, Vec::new())?;
        let history = (0..3)
            .map(|q| tg.sample_velocity(&space, -(q as f64) * dt))
            .collect();
        let mut state = stepper.init_with_history(history, tg.sample_pressure(&space, 0.0), 0.0)?;
        let steps = (t_end / dt).round() as usize;
        let mut pressure_iterations = 0;
        let mut divergence = 0.0;
        for _ in 0..steps {
            let r = stepper.step(&mut state)?;
            pressure_iterations += r.pressure.iterations;
            divergence = r.divergence;
        }
        let exact = tg.sample_velocity(&space, state.t);
        let (linf_error, l2_error) = field_error(&space, &state.v[0], &exact);
        let d = div(&space, &state.v[0])?;
        let width = (scheme_coeffs(stepper.params().order)?.gamma0 * tg.nu * dt).sqrt();
        let side = PI / 2.0;
        let shells = shell_rms(
            &space,
            &d,
            |x| x[0].min(side - x[0]).min(x[1]).min(side - x[1]),
            width,
            3,
        );
        out.push(TaylorGreenRun {
            dt,
            steps,
            l2_error,
            linf_error,
            divergence,
            shells,
            pressure_iterations,
        });
    }
    Ok(out)
}

/// `log2(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

//! P_N-P_N splitting with BDF/EXT time integration.
//!
//! One step from `t^n` to `t^{n+1}`:
//!
//! 1. explicit sum `f = sum_q beta_q E^{n-q}` with `E = F - (v . grad) v`,
//!    plus the BDF history `h = sum_q alpha_q v^{n-q} / dt`;
//! 2. pressure Poisson `A p = int grad(phi) . g - (gamma0/dt) int_dO phi v_b . n`
//!    with `g = f + h - nu curl(curl(v_e))`, `v_e = sum_q beta_q v^{n-q}`,
//!    solved by GMRES with hybrid Schwarz;
//! 3. velocity Helmholtz `(gamma0/dt) B v + nu A v = B (f + h - grad p)` for
//!    each component, solved by PCG with Jacobi after lifting the Dirichlet
//!    data;
//! 4. history rotation and the explicit term for the new level.

use std::sync::Arc;

use crate::bc::BoundarySet;
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::krylov::{gmres, pcg, ProjectionSpace, SolveStats, SolverConfig};
use crate::operators::{
    advect, ax_helmholtz, ax_laplace, cfl, curl, grad, weak_div, Dealias, HelmholtzCoeffs,
};
use crate::precond::{BlockJacobi, HybridSchwarz, Preconditioner};
use crate::space::FunctionSpace;

pub type Vector3 = [Vec<f64>; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCoeffs {
    pub gamma0: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn scheme_coeffs(order: usize) -> Result<SchemeCoeffs> {
    let (gamma0, alpha, beta) = match order {
        1 => (1.0, vec![1.0], vec![1.0]),
        2 => (1.5, vec![2.0, -0.5], vec![2.0, -1.0]),
        3 => (11.0 / 6.0, vec![3.0, -1.5, 1.0 / 3.0], vec![3.0, -3.0, 1.0]),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unsupported scheme order {order}"
            )))
        }
    };
    Ok(SchemeCoeffs {
        gamma0,
        alpha,
        beta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub nu: f64,
    pub dt: f64,
    /// Highest BDF/EXT order, reached after the startup ramp.
    pub order: usize,
    pub dealias: bool,
    pub pressure: SolverConfig,
    pub velocity: SolverConfig,
    /// Stored solutions for the pressure initial guess; 0 disables it.
    pub projection: usize,
}

impl FlowParams {
    pub fn new(nu: f64, dt: f64) -> Self {
        Self {
            nu,
            dt,
            order: 3,
            dealias: false,
            pressure: SolverConfig {
                abs_tol: 1e-5,
                max_iter: 200,
                restart_m: 10,
            },
            velocity: SolverConfig {
                abs_tol: 1e-8,
                max_iter: 50,
                restart_m: 10,
            },
            projection: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !(self.dt > 0.0) || !(1..=3).contains(&self.order) {
            return Err(Error::InvalidArgument(format!(
                "invalid flow parameters {self:?}"
            )));
        }
        self.pressure.validate()?;
        self.velocity.validate()
    }
}

/// Velocity and explicit-term history, newest first, plus the pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    /// `v[q]` is the velocity at `t - q dt`.
    pub v: Vec<Vector3>,
    /// `expl[q]` is `F - (v . grad) v` at the same level as `v[q]`.
    pub expl: Vec<Vector3>,
    pub p: Vec<f64>,
}

impl FlowState {
    /// Number of stored history levels; the scheme order is capped by it.
    pub fn levels(&self) -> usize {
        self.v.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub step: u64,
    pub time: f64,
    pub order: usize,
    pub cfl: f64,
    pub pressure: SolveStats,
    pub velocity: [SolveStats; 3],
    pub divergence: f64,
    pub projection_size: usize,
}

pub struct Stepper {
    space: Arc<FunctionSpace>,
    bcs: BoundarySet,
    params: FlowParams,
    schwarz: HybridSchwarz,
    jacobi: Vec<(f64, [BlockJacobi; 3])>,
    projection: ProjectionSpace,
    dealias: Option<Dealias>,
    forcing: Vec<Box<dyn Forcing>>,
    inv_assembled_mass: Vec<f64>,
}

fn finite(name: &str, v: &[f64], step: u64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: name.to_string(),
            step,
        })
    }
}

impl Stepper {
    pub fn new(
        space: Arc<FunctionSpace>,
        bcs: BoundarySet,
        params: FlowParams,
        forcing: Vec<Box<dyn Forcing>>,
    ) -> Result<Self> {
        params.validate()?;
        let schwarz = HybridSchwarz::new(&space, bcs.pressure_mask())?;
        let dealias = if params.dealias {
            Some(Dealias::new(&space)?)
        } else {
            None
        };
        let mut am = space.mass().to_vec();
        space.gs().add(&mut am)?;
        let inv_assembled_mass = am.iter().map(|m| 1.0 / m).collect();
        Ok(Self {
            projection: ProjectionSpace::new(params.projection),
            space,
            bcs,
            params,
            schwarz,
            jacobi: Vec::new(),
            dealias,
            forcing,
            inv_assembled_mass,
        })
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn boundaries(&self) -> &BoundarySet {
        &self.bcs
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn projection(&self) -> &ProjectionSpace {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut ProjectionSpace {
        &mut self.projection
    }

    /// `u <- gs(B u) / gs(B)`, the mass-weighted continuous average.
    fn mass_average(&self, u: &mut [f64]) -> Result<()> {
        let mass = self.space.mass();
        for (x, m) in u.iter_mut().zip(mass) {
            *x *= m;
        }
        self.space.gs().add(u)?;
        for (x, w) in u.iter_mut().zip(&self.inv_assembled_mass) {
            *x *= w;
        }
        Ok(())
    }

    /// `F(t) - (v . grad) v`, advancing forcing state to `t`.
    fn explicit_term(&mut self, v: &Vector3, t: f64) -> Result<Vector3> {
        let s = &self.space;
        let mut out = [s.zeros(), s.zeros(), s.zeros()];
        for f in &mut self.forcing {
            f.advance(t)?;
        }
        for f in &self.forcing {
            f.add_to(s, t, &mut out)?;
        }
        for c in 0..3 {
            let a = advect(s, v, &v[c], self.dealias.as_ref())?;
            for (o, x) in out[c].iter_mut().zip(&a) {
                *o -= x;
            }
        }
        Ok(out)
    }

    /// Starts from a single velocity level; the first steps ramp the order.
    pub fn init_state(&mut self, mut v0: Vector3, t0: f64) -> Result<FlowState> {
        for c in &mut v0 {
            self.space.check(c)?;
            self.space.gs().avg(c)?;
        }
        self.bcs.apply_dirichlet(&self.space, &mut v0, t0)?;
        let e = self.explicit_term(&v0, t0)?;
        Ok(FlowState {
            t: t0,
            step: 0,
            v: vec![v0],
            expl: vec![e],
            p: self.space.zeros(),
        })
    }

    /// Starts from a full history `v[q]` at `t0 - q dt`, newest first,
    /// skipping the ramp.
    pub fn init_with_history(
        &mut self,
        history: Vec<Vector3>,
        p0: Vec<f64>,
        t0: f64,
    ) -> Result<FlowState> {
        if history.is_empty() || history.len() > 3 {
            return Err(Error::InvalidArgument("history needs 1 to 3 levels".into()));
        }
        self.space.check(&p0)?;
        let dt = self.params.dt;
        let mut v = history;
        let mut expl = vec![Default::default(); v.len()];
        for q in (0..v.len()).rev() {
            let tq = t0 - q as f64 * dt;
            for c in &mut v[q] {
                self.space.check(c)?;
                self.space.gs().avg(c)?;
            }
            self.bcs.apply_dirichlet(&self.space, &mut v[q], tq)?;
            expl[q] = self.explicit_term(&v[q], tq)?;
        }
        Ok(FlowState {
            t: t0,
            step: 0,
            v,
            expl,
            p: p0,
        })
    }

    pub fn order_for(&self, state: &FlowState) -> usize {
        state.levels().min(self.params.order)
    }

    /// Pointwise `f + h` of the momentum right-hand side.
    fn momentum_sources(&self, state: &FlowState, k: &SchemeCoeffs) -> Vector3 {
        let s = &self.space;
        let dt = self.params.dt;
        let mut out = [s.zeros(), s.zeros(), s.zeros()];
        for c in 0..3 {
            for q in 0..k.beta.len() {
                let (b, a) = (k.beta[q], k.alpha[q] / dt);
                let (e, v) = (&state.expl[q][c], &state.v[q][c]);
                for (p, o) in out[c].iter_mut().enumerate() {
                    *o += b * e[p] + a * v[p];
                }
            }
        }
        out
    }

    /// Assembled, masked pressure right-hand side for the next step.
    pub fn pressure_rhs(&self, state: &FlowState) -> Result<Vec<f64>> {
        let k = scheme_coeffs(self.order_for(state))?;
        let s = &self.space;
        let dt = self.params.dt;
        let mut g = self.momentum_sources(state, &k);

        let mut ve = [s.zeros(), s.zeros(), s.zeros()];
        for c in 0..3 {
            for q in 0..k.beta.len() {
                for (o, x) in ve[c].iter_mut().zip(&state.v[q][c]) {
                    *o += k.beta[q] * x;
                }
            }
        }
        let mut omega = curl(s, &ve)?;
        for c in &mut omega {
            self.mass_average(c)?;
        }
        let cc = curl(s, &omega)?;
        for c in 0..3 {
            for (o, x) in g[c].iter_mut().zip(&cc[c]) {
                *o -= self.params.nu * x;
            }
            self.mass_average(&mut g[c])?;
        }
        let mut rhs = weak_div(s, &g)?;

        let vb = self.bcs.dirichlet_values(s, state.t + dt)?;
        let scale = k.gamma0 / dt;
        let facets = s.facets();
        for fi in self.bcs.dirichlet_facets() {
            let f = &facets[fi];
            for (q, &p) in f.points.iter().enumerate() {
                let n = f.normals[q];
                let vn = vb[0][p] * n[0] + vb[1][p] * n[1] + vb[2][p] * n[2];
                rhs[p] -= scale * f.area[q] * vn;
            }
        }
        s.gs().add(&mut rhs)?;
        let mask = self.bcs.pressure_mask();
        for (r, m) in rhs.iter_mut().zip(mask) {
            *r *= m;
        }
        if self.bcs.all_neumann_pressure() {
            let mean = s.gs().global_sum(&rhs) / s.gs().n_global() as f64;
            rhs.iter_mut().for_each(|r| *r -= mean);
        }
        Ok(rhs)
    }

    fn jacobi_for(&mut self, h: HelmholtzCoeffs) -> Result<usize> {
        if let Some(i) = self.jacobi.iter().position(|(g, _)| *g == h.lambda_mass) {
            return Ok(i);
        }
        let m = self.bcs.velocity_masks();
        let pcs = [
            BlockJacobi::new(&self.space, h, &m[0])?,
            BlockJacobi::new(&self.space, h, &m[1])?,
            BlockJacobi::new(&self.space, h, &m[2])?,
        ];
        self.jacobi.push((h.lambda_mass, pcs));
        Ok(self.jacobi.len() - 1)
    }

    fn solve_pressure(&mut self, state: &FlowState, step: u64) -> Result<(Vec<f64>, SolveStats)> {
        let mut rhs = self.pressure_rhs(state)?;
        let s = Arc::clone(&self.space);
        let mask = self.bcs.pressure_mask().to_vec();
        let mut apply_a = |u: &[f64], w: &mut [f64]| {
            ax_helmholtz_assembled(&s, HelmholtzCoeffs::laplace(), &mask, u, w);
        };
        let guess = self.projection.project_pre(&mut rhs, s.gs());
        let mut dp = s.zeros();
        let schwarz = &self.schwarz;
        let mut apply_m = |r: &[f64], z: &mut [f64]| schwarz.apply(r, z);
        let stats = gmres(
            &mut apply_a,
            &mut apply_m,
            &rhs,
            &mut dp,
            &self.params.pressure,
            &mask,
            s.gs(),
        )?;
        if !stats.converged {
            log::warn!(
                "step {step}: pressure solve stopped at residual {:e}",
                stats.final_residual
            );
        }
        let mut p: Vec<f64> = guess.iter().zip(&dp).map(|(a, b)| a + b).collect();
        self.projection.project_post(&p, &mut apply_a, s.gs());
        if self.bcs.all_neumann_pressure() {
            let mean = s.integrate(&p) / s.volume();
            p.iter_mut().for_each(|x| *x -= mean);
        }
        Ok((p, stats))
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut FlowState) -> Result<StepReport> {
        let order = self.order_for(state);
        let k = scheme_coeffs(order)?;
        let dt = self.params.dt;
        let nu = self.params.nu;
        let step = state.step + 1;
        let t_new = state.t + dt;
        for level in &state.v {
            for c in level {
                finite("velocity", c, state.step)?;
            }
        }

        let (p, p_stats) = self.solve_pressure(state, step)?;
        finite("pressure", &p, step)?;

        let s = Arc::clone(&self.space);
        let h = HelmholtzCoeffs::new(nu, k.gamma0 / dt)?;
        let ji = self.jacobi_for(h)?;
        let src = self.momentum_sources(state, &k);
        let gp = grad(&s, &p)?;
        let vb = self.bcs.dirichlet_values(&s, t_new)?;
        let masks = self.bcs.velocity_masks().clone();
        let mut v_new: Vector3 = [s.zeros(), s.zeros(), s.zeros()];
        let mut v_stats = [SolveStats::default(); 3];
        for c in 0..3 {
            let m = &masks[c];
            let lift: Vec<f64> = vb[c].iter().zip(m).map(|(v, m)| v * (1.0 - m)).collect();
            let mut rhs: Vec<f64> = (0..s.n_local())
                .map(|q| s.mass()[q] * (src[c][q] - gp[c][q]))
                .collect();
            let hl = ax_helmholtz(&s, h, &lift)?;
            for (r, x) in rhs.iter_mut().zip(&hl) {
                *r -= x;
            }
            s.gs().add(&mut rhs)?;
            for (r, mm) in rhs.iter_mut().zip(m) {
                *r *= mm;
            }
            let mut x: Vec<f64> = state.v[0][c].iter().zip(m).map(|(v, mm)| v * mm).collect();
            let mut apply_a = |u: &[f64], w: &mut [f64]| ax_helmholtz_assembled(&s, h, m, u, w);
            let pc = &self.jacobi[ji].1[c];
            let mut apply_m = |r: &[f64], z: &mut [f64]| pc.apply(r, z);
            v_stats[c] = pcg(
                &mut apply_a,
                &mut apply_m,
                &rhs,
                &mut x,
                &self.params.velocity,
                m,
                s.gs(),
            )?;
            if !v_stats[c].converged {
                log::warn!(
                    "step {step}: velocity {c} solve stopped at residual {:e}",
                    v_stats[c].final_residual
                );
            }
            for (o, (a, b)) in v_new[c].iter_mut().zip(x.iter().zip(&lift)) {
                *o = a + b;
            }
            finite(["u", "v", "w"][c], &v_new[c], step)?;
        }

        let cfl_new = cfl(&s, &v_new, dt);
        let divergence = crate::diagnostics::divergence_norm(&s, &v_new)?;
        let e_new = self.explicit_term(&v_new, t_new)?;
        state.v.insert(0, v_new);
        state.expl.insert(0, e_new);
        state.v.truncate(3);
        state.expl.truncate(3);
        state.p = p;
        state.t = t_new;
        state.step = step;
        Ok(StepReport {
            step,
            time: t_new,
            order,
            cfl: cfl_new,
            pressure: p_stats,
            velocity: v_stats,
            divergence,
            projection_size: self.projection.len(),
        })
    }
}

/// `mask * gs(ax(u))`.
pub fn ax_helmholtz_assembled(
    space: &FunctionSpace,
    h: HelmholtzCoeffs,
    mask: &[f64],
    u: &[f64],
    w: &mut [f64],
) {
    crate::operators::ax_helmholtz_into(space, h, u, w).expect("sizes checked by caller");
    space.gs().add(w).expect("sizes checked by caller");
    for (x, m) in w.iter_mut().zip(mask) {
        *x *= m;
    }
}

/// Unmasked weak Laplacian, for tests of the pressure equation.
pub fn laplace_assembled(space: &FunctionSpace, u: &[f64]) -> Result<Vec<f64>> {
    let mut w = ax_laplace(space, u)?;
    space.gs().add(&mut w)?;
    Ok(w)
}

//! Case execution: setup, the step loop, and periodic output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use semflow_core::diagnostics::{force_normalization, surface_force, ForceOptions, RunningStats};
use semflow_core::forcing::{Forcing, Tripping};
use semflow_core::timestep::{FlowState, Stepper};
use semflow_core::{Basis1D, BoundarySet, FunctionSpace, StepReport};

use crate::case::{CaseConfig, ForcingConfig, InitialCondition};
use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::output::{
    diagnostics_row, fmt, forces_row, ForceStats, StepCsv, DIAGNOSTICS_HEADER, FORCES_HEADER,
    TIMING_HEADER,
};
use crate::vtk::write_vtk;

/// Steps averaged for the benchmark summary.
pub const BENCHMARK_WINDOW: usize = 100;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub benchmark: bool,
    pub restart: Option<PathBuf>,
    /// Stop after this absolute step even if the case runs longer.
    pub stop_at: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForceSummary {
    pub tag: String,
    pub cd_mean: f64,
    pub cd_std: f64,
    pub cl_mean: f64,
    pub cl_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub final_time: f64,
    pub elements: usize,
    pub points: usize,
    pub max_cfl: f64,
    pub min_cfl: f64,
    pub timed_steps: usize,
    pub wall_mean: f64,
    pub wall_std: f64,
    pub forces: Vec<ForceSummary>,
}

/// Everything needed to advance a case.
pub struct Simulation {
    pub case: CaseConfig,
    pub space: Arc<FunctionSpace>,
    pub stepper: Stepper,
    pub state: FlowState,
}

fn forcing_terms(case: &CaseConfig, t: f64) -> Result<Vec<Box<dyn Forcing>>> {
    let mut out: Vec<Box<dyn Forcing>> = Vec::new();
    for f in &case.forcing {
        let ForcingConfig::Tripping(cfg) = f;
        let mut cfg = cfg.clone();
        cfg.seed = cfg.seed.wrapping_add(case.seed);
        out.push(Box::new(Tripping::new(cfg, t)?));
    }
    Ok(out)
}

impl Simulation {
    pub fn new(case: &CaseConfig) -> Result<Self> {
        Self::build(case, None)
    }

    pub fn from_checkpoint(case: &CaseConfig, cp: Checkpoint) -> Result<Self> {
        Self::build(case, Some(cp))
    }

    fn build(case: &CaseConfig, cp: Option<Checkpoint>) -> Result<Self> {
        case.validate()?;
        let mesh = Arc::new(case.build_mesh()?);
        let space = Arc::new(FunctionSpace::new(mesh, Basis1D::new(case.order)?)?);
        let bcs = BoundarySet::new(&space, case.boundary_kinds())?;
        let params = case.flow_params();
        let dt = params.dt;
        let t0 = cp.as_ref().map_or(0.0, |c| c.state.t);
        let mut stepper = Stepper::new(Arc::clone(&space), bcs, params, forcing_terms(case, t0)?)?;
        let state = match cp {
            Some(cp) => {
                if cp.order != case.order
                    || cp.elements != space.num_elements()
                    || cp.state.p.len() != space.n_local()
                {
                    bail!(
                        "checkpoint is for order {} with {} elements, case has order {} with {}",
                        cp.order,
                        cp.elements,
                        case.order,
                        space.num_elements()
                    );
                }
                *stepper.projection_mut() = cp.projection;
                cp.state
            }
            None => match &case.initial {
                InitialCondition::Zero => {
                    stepper.init_state([space.zeros(), space.zeros(), space.zeros()], 0.0)?
                }
                InitialCondition::Uniform { value } => {
                    let v = value.map(|c| vec![c; space.n_local()]);
                    stepper.init_state(v, 0.0)?
                }
                InitialCondition::TaylorGreen => {
                    let tg = case.taylor_green();
                    let history = (0..3)
                        .map(|q| tg.sample_velocity(&space, -(q as f64) * dt))
                        .collect();
                    stepper.init_with_history(history, tg.sample_pressure(&space, 0.0), 0.0)?
                }
            },
        };
        Ok(Self {
            case: case.clone(),
            space,
            stepper,
            state,
        })
    }

    pub fn step(&mut self) -> Result<StepReport> {
        Ok(self.stepper.step(&mut self.state)?)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            order: self.case.order,
            elements: self.space.num_elements(),
            state: self.state.clone(),
            projection: self.stepper.projection().clone(),
        }
    }

    fn force_options(&self) -> (ForceOptions, f64) {
        let o = &self.case.output;
        let norm = o
            .force_norm
            .as_ref()
            .map_or(1.0, |n| force_normalization(n.u_cl, n.h, n.diameter));
        let opts = ForceOptions {
            mu: self.case.nu(),
            symmetric_stress: o.symmetric_stress,
            on_body: o.on_body,
        };
        (opts, norm)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mut s = RunningStats::new();
    xs.iter().for_each(|&x| s.push(x));
    (s.mean(), s.std())
}

/// Runs a case, writing `diagnostics.csv`, `timing.csv`, `forces.csv`,
/// snapshots, checkpoints and `summary.json` into `opts.output_dir`.
pub fn run_case(case: &CaseConfig, opts: &RunOptions) -> Result<RunSummary> {
    let dir = &opts.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut sim = match &opts.restart {
        Some(p) => Simulation::from_checkpoint(case, read_checkpoint(p)?)?,
        None => Simulation::new(case)?,
    };
    let resume = opts.restart.as_ref().map(|_| sim.state.step);
    let (mut diag, _) = StepCsv::open(&dir.join("diagnostics.csv"), &DIAGNOSTICS_HEADER, resume)?;
    let (mut timing, _) = StepCsv::open(&dir.join("timing.csv"), &TIMING_HEADER, resume)?;
    let tags = &case.output.forces;
    let mut stats: BTreeMap<String, ForceStats> = tags
        .iter()
        .map(|t| (t.clone(), ForceStats::default()))
        .collect();
    let mut forces = None;
    if !tags.is_empty() {
        let (w, kept) = StepCsv::open(&dir.join("forces.csv"), &FORCES_HEADER, resume)?;
        for rec in kept {
            if let Some(s) = stats.get_mut(&rec[2]) {
                s.cd.push(rec[9].parse()?);
                s.cl.push(rec[10].parse()?);
            }
        }
        forces = Some(w);
    }
    let (fopts, norm) = sim.force_options();

    let last = opts.stop_at.map_or(case.steps(), |s| s.min(case.steps()));
    let mut walls = Vec::new();
    let (mut max_cfl, mut min_cfl) = (0.0f64, f64::INFINITY);
    log::info!(
        "{} elements, order {}, {} points; steps {}..{}",
        sim.space.num_elements(),
        case.order,
        sim.space.n_local(),
        sim.state.step,
        last
    );
    while sim.state.step < last {
        let t0 = Instant::now();
        let r = sim.step()?;
        let wall = t0.elapsed().as_secs_f64();
        walls.push(wall);
        max_cfl = max_cfl.max(r.cfl);
        min_cfl = min_cfl.min(r.cfl);
        if r.cfl > 1.0 {
            log::warn!("step {}: CFL {:.3} above 1", r.step, r.cfl);
        }
        diag.row(&diagnostics_row(&r))?;
        timing.row(&[r.step.to_string(), fmt(wall)])?;
        if let Some(w) = forces.as_mut() {
            for tag in tags {
                let f = surface_force(
                    &sim.space,
                    tag,
                    &sim.state.p,
                    &sim.state.v[0],
                    fopts,
                    r.time,
                    norm,
                )?;
                let s = stats.get_mut(tag).expect("stats per tag");
                s.push(&f);
                w.row(&forces_row(r.step, tag, &f, s))?;
            }
        }
        let o = &case.output;
        if o.fields_every > 0 && r.step % o.fields_every == 0 {
            let path = dir.join(format!("fields_{:06}.vtk", r.step));
            write_vtk(
                &path,
                &sim.space,
                &sim.state.v[0],
                &sim.state.p,
                &format!("step {} t {}", r.step, r.time),
            )?;
        }
        if o.checkpoint_every > 0 && r.step % o.checkpoint_every == 0 {
            write_checkpoint(
                &sim.checkpoint(),
                &dir.join(format!("checkpoint_{:06}.chk", r.step)),
            )?;
        }
        log::debug!(
            "step {} t {:.6} cfl {:.3} p {} v {:?} div {:.3e}",
            r.step,
            r.time,
            r.cfl,
            r.pressure.iterations,
            r.velocity.map(|v| v.iterations),
            r.divergence
        );
    }
    diag.flush()?;
    timing.flush()?;
    if let Some(w) = forces.as_mut() {
        w.flush()?;
    }

    let window = if opts.benchmark {
        BENCHMARK_WINDOW.min(walls.len())
    } else {
        walls.len()
    };
    let (wall_mean, wall_std) = mean_std(&walls[walls.len() - window..]);
    let summary = RunSummary {
        steps: sim.state.step,
        final_time: sim.state.t,
        elements: sim.space.num_elements(),
        points: sim.space.n_local(),
        max_cfl,
        min_cfl: if min_cfl.is_finite() { min_cfl } else { 0.0 },
        timed_steps: window,
        wall_mean,
        wall_std,
        forces: stats
            .iter()
            .map(|(tag, s)| ForceSummary {
                tag: tag.clone(),
                cd_mean: s.cd.mean(),
                cd_std: s.cd.std(),
                cl_mean: s.cl.mean(),
                cl_std: s.cl.std(),
            })
            .collect(),
    };
    write_summary(dir, &summary)?;
    Ok(summary)
}

fn write_summary(dir: &Path, s: &RunSummary) -> Result<()> {
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(s)?)
        .with_context(|| format!("writing {}", path.display()))
}

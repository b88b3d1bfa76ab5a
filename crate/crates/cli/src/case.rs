//! TOML case files. See `docs/case_format.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use semflow_core::analytic::TaylorGreen;
use semflow_core::bc::{BcKind, DirichletFn, Rotor};
use semflow_core::forcing::TrippingConfig;
use semflow_core::mesh::{
    gen_box_mesh, gen_cylinder_box_mesh, read_mesh, BoxSpec, CylinderBoxSpec,
};
use semflow_core::timestep::FlowParams;
use semflow_core::{Mesh, SolverConfig};

pub const CASE_VERSION: u32 = 1;
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub version: u32,
    pub order: usize,
    #[serde(default)]
    pub seed: u64,
    pub mesh: MeshSource,
    pub flow: FlowConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialCondition,
    pub boundary: BTreeMap<String, BoundaryConfig>,
    #[serde(default)]
    pub forcing: Vec<ForcingConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// Path relative to the case file.
    File {
        path: PathBuf,
    },
    Box(BoxSpec),
    Cylinder(CylinderBoxSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Kinematic viscosity. Exactly one of `nu` and `re` is required.
    pub nu: Option<f64>,
    /// Reynolds number `u_ref l_ref / nu`.
    pub re: Option<f64>,
    #[serde(default = "one")]
    pub u_ref: f64,
    #[serde(default = "one")]
    pub l_ref: f64,
    pub dt: f64,
    /// Number of steps. Exactly one of `steps` and `end_time` is required.
    pub steps: Option<u64>,
    pub end_time: Option<f64>,
    #[serde(default = "three")]
    pub scheme_order: usize,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default = "twenty")]
    pub projection: usize,
}

fn one() -> f64 {
    1.0
}
fn three() -> usize {
    3
}
fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "restart_default")]
    pub restart: usize,
}

fn restart_default() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "pressure_default")]
    pub pressure: SolverSettings,
    #[serde(default = "velocity_default")]
    pub velocity: SolverSettings,
}

fn pressure_default() -> SolverSettings {
    SolverSettings {
        tol: 1e-5,
        max_iter: 200,
        restart: 10,
    }
}

fn velocity_default() -> SolverSettings {
    SolverSettings {
        tol: 1e-8,
        max_iter: 100,
        restart: 10,
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            pressure: pressure_default(),
            velocity: velocity_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    #[default]
    Zero,
    Uniform {
        value: [f64; 3],
    },
    /// Exact three-level history of the Taylor-Green vortex with the case's
    /// viscosity, so the run starts at full order.
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Wall,
    Inflow {
        u_cl: f64,
        h: f64,
    },
    Rotor {
        alpha: f64,
        u_cl: f64,
        diameter: f64,
        /// Smoothing height; defaults to `0.02 h`.
        delta: Option<f64>,
        h: Option<f64>,
        #[serde(default)]
        center: [f64; 2],
    },
    Uniform {
        value: [f64; 3],
    },
    TaylorGreen,
    Outflow,
    Symmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForcingConfig {
    Tripping(TrippingConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceNorm {
    pub u_cl: f64,
    pub h: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// VTK snapshot cadence in steps; 0 disables.
    #[serde(default)]
    pub fields_every: u64,
    /// Checkpoint cadence in steps; 0 disables.
    #[serde(default)]
    pub checkpoint_every: u64,
    /// Tags whose surface force goes to `forces.csv`.
    #[serde(default)]
    pub forces: Vec<String>,
    pub force_norm: Option<ForceNorm>,
    #[serde(default = "yes")]
    pub on_body: bool,
    #[serde(default)]
    pub symmetric_stress: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            fields_every: 0,
            checkpoint_every: 0,
            forces: Vec::new(),
            force_norm: None,
            on_body: true,
            symmetric_stress: false,
        }
    }
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let case: CaseConfig = toml::from_str(text).context("parsing case file")?;
        case.validate()?;
        Ok(case)
    }

    /// Reads a case and resolves a relative mesh path against the case
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut case = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        if let MeshSource::File { path: p } = &mut case.mesh {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CASE_VERSION {
            bail!(
                "unsupported case version {} (expected {CASE_VERSION})",
                self.version
            );
        }
        if !(1..=MAX_ORDER).contains(&self.order) {
            bail!("order must be in 1..={MAX_ORDER}, got {}", self.order);
        }
        let f = &self.flow;
        if !(f.dt > 0.0) {
            bail!("flow.dt must be positive, got {}", f.dt);
        }
        match (f.nu, f.re) {
            (Some(nu), None) if nu > 0.0 => {}
            (None, Some(re)) if re > 0.0 && f.u_ref > 0.0 && f.l_ref > 0.0 => {}
            _ => bail!("give exactly one of flow.nu and flow.re, positive"),
        }
        match (f.steps, f.end_time) {
            (Some(_), None) => {}
            (None, Some(t)) if t > 0.0 => {}
            _ => bail!("give exactly one of flow.steps and flow.end_time"),
        }
        if !(1..=3).contains(&f.scheme_order) {
            bail!("flow.scheme_order must be 1, 2 or 3");
        }
        for (name, s) in [
            ("pressure", self.solver.pressure),
            ("velocity", self.solver.velocity),
        ] {
            SolverConfig::new(s.tol, s.max_iter, s.restart)
                .with_context(|| format!("solver.{name}"))?;
        }
        for (tag, b) in &self.boundary {
            if let BoundaryConfig::Rotor {
                delta: None,
                h: None,
                ..
            } = b
            {
                bail!("boundary.{tag}: rotor needs delta or h");
            }
        }
        for fc in &self.forcing {
            let ForcingConfig::Tripping(t) = fc;
            t.validate()?;
        }
        Ok(())
    }

    pub fn nu(&self) -> f64 {
        match (self.flow.nu, self.flow.re) {
            (Some(nu), _) => nu,
            (None, Some(re)) => self.flow.u_ref * self.flow.l_ref / re,
            _ => unreachable!("validated"),
        }
    }

    pub fn steps(&self) -> u64 {
        match (self.flow.steps, self.flow.end_time) {
            (Some(n), _) => n,
            (None, Some(t)) => (t / self.flow.dt).round() as u64,
            _ => unreachable!("validated"),
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        Ok(match &self.mesh {
            MeshSource::File { path } => {
                read_mesh(path).with_context(|| format!("reading mesh {}", path.display()))?
            }
            MeshSource::Box(b) => gen_box_mesh(b)?,
            MeshSource::Cylinder(c) => gen_cylinder_box_mesh(c)?,
        })
    }

    pub fn flow_params(&self) -> FlowParams {
        let mut p = FlowParams::new(self.nu(), self.flow.dt);
        p.order = self.flow.scheme_order;
        p.dealias = self.flow.dealias;
        p.projection = self.flow.projection;
        let sc = |s: SolverSettings| SolverConfig {
            abs_tol: s.tol,
            max_iter: s.max_iter,
            restart_m: s.restart,
        };
        p.pressure = sc(self.solver.pressure);
        p.velocity = sc(self.solver.velocity);
        p
    }

    pub fn taylor_green(&self) -> TaylorGreen {
        TaylorGreen { nu: self.nu() }
    }

    pub fn boundary_kinds(&self) -> BTreeMap<String, BcKind> {
        let tg = self.taylor_green();
        self.boundary
            .iter()
            .map(|(tag, b)| {
                let kind = match b {
                    BoundaryConfig::Wall => BcKind::Wall,
                    BoundaryConfig::Inflow { u_cl, h } => BcKind::Inflow { u_cl: *u_cl, h: *h },
                    BoundaryConfig::Rotor {
                        alpha,
                        u_cl,
                        diameter,
                        delta,
                        h,
                        center,
                    } => BcKind::Rotor(Rotor {
                        alpha: *alpha,
                        u_cl: *u_cl,
                        diameter: *diameter,
                        delta: delta.unwrap_or_else(|| 0.02 * h.unwrap_or(0.0)),
                        center: *center,
                    }),
                    BoundaryConfig::Uniform { value } => {
                        let v = *value;
                        BcKind::Function(Arc::new(move |_, _| v) as DirichletFn)
                    }
                    BoundaryConfig::TaylorGreen => {
                        BcKind::Function(Arc::new(move |x, t| tg.velocity(x, t)) as DirichletFn)
                    }
                    BoundaryConfig::Outflow => BcKind::Outflow,
                    BoundaryConfig::Symmetry => BcKind::Symmetry,
                };
                (tag.clone(), kind)
            })
            .collect()
    }
}

//! Volume forcing: stochastic boundary-layer tripping and an analytic hook.
//!
//! The trip force acts in `y`:
//!
//! ```text
//! F_y = exp(-(x-x0)^2/lx^2 - (y)^2/ly^2) g(z, t)
//! g(z, t) = Ts h0(z) + Tu [(1 - b(p)) h_i(z) + b(p) h_{i+1}(z)]
//! i = floor(t/ts), p = t/ts - i, b(p) = 3p^2 - 2p^3
//! ```
//!
//! Each `h` is `N_m^{-1/2} sum_k sin(2 pi k (z - z_min)/L_z + phi_k)` with
//! phases drawn from ChaCha8 seeded by `seed` on stream `i` (stream
//! `u64::MAX` for the steady `h0`), so any segment can be regenerated
//! without replaying the sequence.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::FunctionSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrippingConfig {
    pub x0: f64,
    pub lx: f64,
    pub ly: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Steady amplitude `T_s`.
    #[serde(default)]
    pub amp_steady: f64,
    /// Time-dependent amplitude `T_u`.
    #[serde(default = "default_amp_unsteady")]
    pub amp_unsteady: f64,
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_amp_unsteady() -> f64 {
    0.3
}
fn default_time_scale() -> f64 {
    0.14
}
fn default_modes() -> usize {
    40
}

impl TrippingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_scale > 0.0)
            || self.modes == 0
            || !(self.lx > 0.0)
            || !(self.ly > 0.0)
            || !(self.z_max > self.z_min)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid tripping config {self:?}"
            )));
        }
        Ok(())
    }

    /// `b(p) = 3p^2 - 2p^3`.
    pub fn smoothstep(p: f64) -> f64 {
        p * p * (3.0 - 2.0 * p)
    }

    fn phases(&self, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        (0..self.modes)
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect()
    }

    fn h(&self, phases: &[f64], z: f64) -> f64 {
        let lz = self.z_max - self.z_min;
        let s: f64 = phases
            .iter()
            .enumerate()
            .map(|(k, ph)| (2.0 * PI * (k + 1) as f64 * (z - self.z_min) / lz + ph).sin())
            .sum();
        s / (self.modes as f64).sqrt()
    }

    pub fn envelope(&self, x: f64, y: f64) -> f64 {
        (-(x - self.x0).powi(2) / (self.lx * self.lx) - y * y / (self.ly * self.ly)).exp()
    }
}

/// Cached coefficient sets for the current segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrippingState {
    segment: u64,
    time: f64,
    steady: Vec<f64>,
    current: Vec<f64>,
    next: Vec<f64>,
    draws: u64,
}

impl TrippingState {
    pub fn new(cfg: &TrippingConfig, t: f64) -> Result<Self> {
        cfg.validate()?;
        let segment = (t / cfg.time_scale).floor().max(0.0) as u64;
        Ok(Self {
            segment,
            time: t,
            steady: cfg.phases(u64::MAX),
            current: cfg.phases(segment),
            next: cfg.phases(segment + 1),
            draws: 0,
        })
    }

    pub fn segment(&self) -> u64 {
        self.segment
    }

    /// Fresh coefficient sets drawn by [`trip_advance`] so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Moves the state to time `t`, shifting `h_{i+1}` into `h_i` and drawing
/// one new set per segment boundary crossed.
pub fn trip_advance(cfg: &TrippingConfig, state: &mut TrippingState, t: f64) -> Result<()> {
    if t < state.time {
        return Err(Error::TimeReversal {
            requested: t,
            current: state.time,
        });
    }
    let target = (t / cfg.time_scale).floor().max(0.0) as u64;
    if target >= state.segment + 2 {
        state.current = cfg.phases(target);
        state.next = cfg.phases(target + 1);
        state.draws += 2;
    } else if target == state.segment + 1 {
        state.current = std::mem::take(&mut state.next);
        state.next = cfg.phases(target + 1);
        state.draws += 1;
    }
    state.segment = target;
    state.time = t;
    Ok(())
}

/// `g(z, t)`; zero outside `[z_min, z_max]`.
pub fn trip_g(cfg: &TrippingConfig, state: &TrippingState, z: f64, t: f64) -> Result<f64> {
    let target = (t / cfg.time_scale).floor().max(0.0) as u64;
    if t < state.time || target != state.segment {
        return Err(Error::InvalidArgument(format!(
            "tripping state at segment {} (t = {}) cannot evaluate t = {t}",
            state.segment, state.time
        )));
    }
    if z < cfg.z_min || z > cfg.z_max {
        return Ok(0.0);
    }
    let p = t / cfg.time_scale - target as f64;
    let b = TrippingConfig::smoothstep(p);
    let unsteady = (1.0 - b) * cfg.h(&state.current, z) + b * cfg.h(&state.next, z);
    Ok(cfg.amp_steady * cfg.h(&state.steady, z) + cfg.amp_unsteady * unsteady)
}

/// The `y` component of the trip force at `x`.
pub fn trip_eval(cfg: &TrippingConfig, state: &TrippingState, x: [f64; 3], t: f64) -> Result<f64> {
    let env = cfg.envelope(x[0], x[1]);
    if env == 0.0 {
        return Ok(0.0);
    }
    Ok(env * trip_g(cfg, state, x[2], t)?)
}

/// A volume force added pointwise to the explicit terms.
pub trait Forcing: Send + Sync {
    /// Advances internal state to `t`; called once per evaluation time.
    fn advance(&mut self, t: f64) -> Result<()>;
    /// Adds the force at time `t` into `out`.
    fn add_to(&self, space: &FunctionSpace, t: f64, out: &mut [Vec<f64>; 3]) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct Tripping {
    pub config: TrippingConfig,
    pub state: TrippingState,
}

impl Tripping {
    pub fn new(config: TrippingConfig, t: f64) -> Result<Self> {
        let state = TrippingState::new(&config, t)?;
        Ok(Self { config, state })
    }
}

impl Forcing for Tripping {
    fn advance(&mut self, t: f64) -> Result<()> {
        trip_advance(&self.config, &mut self.state, t)
    }

    fn add_to(&self, space: &FunctionSpace, t: f64, out: &mut [Vec<f64>; 3]) -> Result<()> {
        // Skip points beyond six attenuation lengths, where the envelope is
        // below 1e-15.
        let (rx, ry) = (6.0 * self.config.lx, 6.0 * self.config.ly);
        for p in 0..space.n_local() {
            let x = space.point(p);
            if (x[0] - self.config.x0).abs() > rx || x[1].abs() > ry {
                continue;
            }
            out[1][p] += trip_eval(&self.config, &self.state, x, t)?;
        }
        Ok(())
    }
}

pub type ForceFn = Arc<dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync>;

/// Analytic body force `f(x, t)`.
#[derive(Clone)]
pub struct AnalyticForcing(pub ForceFn);

impl fmt::Debug for AnalyticForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticForcing")
    }
}

impl Forcing for AnalyticForcing {
    fn advance(&mut self, _t: f64) -> Result<()> {
        Ok(())
    }

    fn add_to(&self, space: &FunctionSpace, t: f64, out: &mut [Vec<f64>; 3]) -> Result<()> {
        for p in 0..space.n_local() {
            let f = (self.0)(space.point(p), t);
            for c in 0..3 {
                out[c][p] += f[c];
            }
        }
        Ok(())
    }
}

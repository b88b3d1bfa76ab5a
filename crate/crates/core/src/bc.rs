//! Boundary conditions and the masks the solvers consume.
//!
//! Where facets of different kinds meet, a point takes the condition of
//! highest priority: Dirichlet kinds (wall > rotor > inflow > function,
//! then tag name) over symmetry over outflow. Velocity masks are per
//! component; the pressure mask pins `p = 0` on outflow facets.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gs::GsOp;
use crate::space::FunctionSpace;

/// Power-law inflow `u_x = u_cl (y/h)^{1/7}`.
pub fn inflow_profile(y: f64, u_cl: f64, h: f64) -> [f64; 3] {
    let yc = y.clamp(0.0, h);
    if yc != y {
        log::warn!("inflow height {y} outside [0, {h}], clamped");
    }
    [u_cl * seventh_root(yc / h), 0.0, 0.0]
}

/// `x^{1/7}` for `x >= 0`. One Newton step removes the bias from the
/// rounded exponent, so exact roots (e.g. `2^{-7k}`) come out exact.
pub fn seventh_root(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let r = x.powf(1.0 / 7.0);
    r - (r.powi(7) - x) / (7.0 * r.powi(6))
}

/// Smoothed spin speed: 0 at `y = 0`, `u_sp` for `y >= delta`.
pub fn rotor_speed(y: f64, u_sp: f64, delta: f64) -> f64 {
    let q = y / delta;
    if q <= 0.0 {
        0.0
    } else if q >= 1.0 {
        u_sp
    } else {
        u_sp / (1.0 + (1.0 / (q - 1.0) + 1.0 / q).exp())
    }
}

/// Rotating cylinder wall, axis along `y` through `(center[0], ., center[1])`
/// in `(x, z)`, spinning with angular velocity along `+y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotor {
    pub alpha: f64,
    pub u_cl: f64,
    pub diameter: f64,
    pub delta: f64,
    pub center: [f64; 2],
}

impl Rotor {
    pub fn spin_speed(&self) -> f64 {
        self.alpha * self.u_cl
    }

    /// Tangential velocity `s(y) e_theta` with `e_theta = y_hat x r_hat`.
    pub fn velocity(&self, x: [f64; 3]) -> [f64; 3] {
        let dx = x[0] - self.center[0];
        let dz = x[2] - self.center[1];
        let r = (dx * dx + dz * dz).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let s = rotor_speed(x[1], self.spin_speed(), self.delta);
        [s * dz / r, 0.0, -s * dx / r]
    }
}

pub type DirichletFn = Arc<dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
pub enum BcKind {
    /// No-slip, zero velocity.
    Wall,
    Inflow {
        u_cl: f64,
        h: f64,
    },
    Rotor(Rotor),
    /// Prescribed velocity `g(x, t)`.
    Function(DirichletFn),
    /// Natural outflow; pins pressure to zero.
    Outflow,
    /// Zero normal velocity on an axis-aligned facet.
    Symmetry,
}

impl fmt::Debug for BcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcKind::Wall => write!(f, "Wall"),
            BcKind::Inflow { u_cl, h } => write!(f, "Inflow {{ u_cl: {u_cl}, h: {h} }}"),
            BcKind::Rotor(r) => write!(f, "{r:?}"),
            BcKind::Function(_) => write!(f, "Function"),
            BcKind::Outflow => write!(f, "Outflow"),
            BcKind::Symmetry => write!(f, "Symmetry"),
        }
    }
}

impl BcKind {
    fn dirichlet_rank(&self) -> Option<u8> {
        match self {
            BcKind::Wall => Some(4),
            BcKind::Rotor(_) => Some(3),
            BcKind::Inflow { .. } => Some(2),
            BcKind::Function(_) => Some(1),
            _ => None,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet_rank().is_some()
    }

    fn value(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        match self {
            BcKind::Inflow { u_cl, h } => inflow_profile(x[1], *u_cl, *h),
            BcKind::Rotor(r) => r.velocity(x),
            BcKind::Function(g) => g(x, t),
            _ => [0.0; 3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySet {
    kinds: BTreeMap<String, BcKind>,
    /// Per component: 0 where the component is prescribed.
    vel_mask: [Vec<f64>; 3],
    pres_mask: Vec<f64>,
    /// For each Dirichlet-velocity facet, the points it owns (winning
    /// priority); values are evaluated there.
    owners: Vec<(usize, Vec<usize>)>,
    /// Number of owning facet copies per local point, after assembly.
    owner_count: Vec<f64>,
    all_neumann_pressure: bool,
}

impl BoundarySet {
    pub fn new(space: &FunctionSpace, kinds: BTreeMap<String, BcKind>) -> Result<Self> {
        let tags = space.mesh().tags();
        for t in kinds.keys() {
            if !tags.contains(t) {
                return Err(Error::UnknownTag(t.clone()));
            }
        }
        for t in &tags {
            if !kinds.contains_key(t) {
                return Err(Error::Boundary(format!("no condition given for tag `{t}`")));
            }
        }
        let gs = space.gs();
        let nl = space.n_local();
        let facets = space.facets();

        // Dirichlet priority per point: 4-bit kind rank, then tag order.
        let tag_order: BTreeMap<&str, usize> = kinds
            .keys()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let ntags = kinds.len() as f64;
        let facet_priority = |tag: &str| -> Option<f64> {
            kinds[tag]
                .dirichlet_rank()
                .map(|r| r as f64 * (ntags + 1.0) + (ntags - tag_order[tag] as f64))
        };
        let mut best = vec![0.0; nl];
        for f in facets {
            if let Some(pr) = facet_priority(&f.tag) {
                for &p in &f.points {
                    best[p] = f64::max(best[p], pr);
                }
            }
        }
        gs.op(&mut best, GsOp::Max)?;

        let mut vel_mask = [vec![1.0; nl], vec![1.0; nl], vec![1.0; nl]];
        let mut pres_mask = vec![1.0; nl];
        let mut owners = Vec::new();
        let mut owner_count = vec![0.0; nl];
        let mut has_outflow = false;
        for (fi, f) in facets.iter().enumerate() {
            match &kinds[&f.tag] {
                BcKind::Outflow => {
                    has_outflow = true;
                    for &p in &f.points {
                        pres_mask[p] = 0.0;
                    }
                }
                BcKind::Symmetry => {
                    let nrm = f.normals[0];
                    let axis = (0..3)
                        .max_by(|&a, &b| nrm[a].abs().total_cmp(&nrm[b].abs()))
                        .unwrap();
                    for (q, nv) in f.normals.iter().enumerate() {
                        let off: f64 = (0..3).filter(|&c| c != axis).map(|c| nv[c].abs()).sum();
                        if off > 1e-8 {
                            return Err(Error::Boundary(format!(
                                "symmetry facet ({}, {}) tag `{}` is not axis-aligned at point {q}",
                                f.element, f.face, f.tag
                            )));
                        }
                    }
                    for &p in &f.points {
                        vel_mask[axis][p] = 0.0;
                    }
                }
                _ => {
                    let pr = facet_priority(&f.tag).expect("dirichlet kind");
                    let mut own = Vec::new();
                    for &p in &f.points {
                        for m in &mut vel_mask {
                            m[p] = 0.0;
                        }
                        if best[p] == pr {
                            own.push(p);
                            owner_count[p] += 1.0;
                        }
                    }
                    owners.push((fi, own));
                }
            }
        }
        for m in &mut vel_mask {
            gs.op(m, GsOp::Min)?;
        }
        gs.op(&mut pres_mask, GsOp::Min)?;
        gs.add(&mut owner_count)?;
        Ok(Self {
            kinds,
            vel_mask,
            pres_mask,
            owners,
            owner_count,
            all_neumann_pressure: !has_outflow,
        })
    }

    pub fn kind(&self, tag: &str) -> Option<&BcKind> {
        self.kinds.get(tag)
    }

    pub fn kinds(&self) -> &BTreeMap<String, BcKind> {
        &self.kinds
    }

    pub fn velocity_masks(&self) -> &[Vec<f64>; 3] {
        &self.vel_mask
    }

    pub fn pressure_mask(&self) -> &[f64] {
        &self.pres_mask
    }

    /// True when no facet pins the pressure, leaving constants in its null
    /// space.
    pub fn all_neumann_pressure(&self) -> bool {
        self.all_neumann_pressure
    }

    /// Facets with prescribed velocity, by index into `space.facets()`.
    pub fn dirichlet_facets(&self) -> impl Iterator<Item = usize> + '_ {
        self.owners.iter().map(|(f, _)| *f)
    }

    /// Continuous field holding the prescribed boundary velocity at
    /// Dirichlet points and zero elsewhere. Symmetry-constrained
    /// components are zero.
    pub fn dirichlet_values(&self, space: &FunctionSpace, t: f64) -> Result<[Vec<f64>; 3]> {
        let nl = space.n_local();
        let mut out = [vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]];
        let facets = space.facets();
        for (fi, own) in &self.owners {
            let kind = &self.kinds[&facets[*fi].tag];
            for &p in own {
                let v = kind.value(space.point(p), t);
                for c in 0..3 {
                    out[c][p] += v[c];
                }
            }
        }
        for c in 0..3 {
            space.gs().add(&mut out[c])?;
            for (p, x) in out[c].iter_mut().enumerate() {
                if self.owner_count[p] > 0.0 {
                    *x /= self.owner_count[p];
                }
            }
        }
        Ok(out)
    }

    /// Overwrites prescribed components with their boundary values.
    pub fn apply_dirichlet(
        &self,
        space: &FunctionSpace,
        fields: &mut [Vec<f64>; 3],
        t: f64,
    ) -> Result<()> {
        let vals = self.dirichlet_values(space, t)?;
        for c in 0..3 {
            space.check(&fields[c])?;
            for (p, x) in fields[c].iter_mut().enumerate() {
                let m = self.vel_mask[c][p];
                *x = *x * m + vals[c][p] * (1.0 - m);
            }
        }
        Ok(())
    }
}

//! Restart files. Layout (little-endian), see `docs/checkpoint_format.md`:
//!
//! ```text
//! magic      8 bytes  "SEMCHK\0\0"
//! version    u32
//! order      u32
//! elements   u64
//! n_local    u64
//! step       u64
//! time       f64
//! levels     u32
//! velocity   levels * 3 * n_local f64, newest level first
//! explicit   levels * 3 * n_local f64
//! pressure   n_local f64
//! proj_cap   u64
//! proj_reset u64
//! proj_since u64
//! proj_len   u64
//! proj_vecs  proj_len * (x, A x), each n_local f64
//! "END\0"
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};

use semflow_core::timestep::{FlowState, Vector3};
use semflow_core::ProjectionSpace;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SEMCHK\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub order: usize,
    pub elements: usize,
    pub state: FlowState,
    pub projection: ProjectionSpace,
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    out.reserve(v.len() * 8);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn checkpoint_bytes(cp: &Checkpoint) -> Vec<u8> {
    let st = &cp.state;
    let n = st.p.len();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cp.order as u32).to_le_bytes());
    out.extend_from_slice(&(cp.elements as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&st.step.to_le_bytes());
    out.extend_from_slice(&st.t.to_le_bytes());
    out.extend_from_slice(&(st.v.len() as u32).to_le_bytes());
    for level in st.v.iter().chain(&st.expl) {
        for c in level {
            put_f64s(&mut out, c);
        }
    }
    put_f64s(&mut out, &st.p);
    let pr = &cp.projection;
    let (xs, axs) = pr.basis();
    for v in [
        pr.capacity(),
        pr.reset_interval(),
        pr.steps_since_reset(),
        xs.len(),
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for (x, ax) in xs.iter().zip(axs) {
        put_f64s(&mut out, x);
        put_f64s(&mut out, ax);
    }
    out.extend_from_slice(b"END\0");
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            bail!("checkpoint truncated at byte {} reading {what}", self.pos);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).context("size overflow")?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn vec3(&mut self, n: usize, what: &str) -> Result<Vector3> {
        Ok([
            self.f64s(n, what)?,
            self.f64s(n, what)?,
            self.f64s(n, what)?,
        ])
    }
}

pub fn checkpoint_from_bytes(data: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { data, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        bail!("not a checkpoint file (bad magic)");
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        bail!("checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})");
    }
    let order = r.u32("order")? as usize;
    let elements = r.u64("element count")? as usize;
    let n = r.u64("point count")? as usize;
    let step = r.u64("step")?;
    let t = f64::from_le_bytes(r.take(8, "time")?.try_into().unwrap());
    let levels = r.u32("levels")? as usize;
    if !(1..=3).contains(&levels) {
        bail!("checkpoint has {levels} history levels");
    }
    let mut v = Vec::with_capacity(levels);
    for _ in 0..levels {
        v.push(r.vec3(n, "velocity")?);
    }
    let mut expl = Vec::with_capacity(levels);
    for _ in 0..levels {
        expl.push(r.vec3(n, "explicit terms")?);
    }
    let p = r.f64s(n, "pressure")?;
    let capacity = r.u64("projection capacity")? as usize;
    let reset = r.u64("projection reset")? as usize;
    let since = r.u64("projection counter")? as usize;
    let len = r.u64("projection size")? as usize;
    if len > capacity {
        bail!("projection size {len} exceeds capacity {capacity}");
    }
    let mut xs = Vec::with_capacity(len);
    let mut axs = Vec::with_capacity(len);
    for _ in 0..len {
        xs.push(r.f64s(n, "projection vector")?);
        axs.push(r.f64s(n, "projection vector")?);
    }
    if r.take(4, "end marker")? != b"END\0" {
        bail!("checkpoint end marker missing");
    }
    if r.pos != data.len() {
        bail!("{} trailing bytes after checkpoint", data.len() - r.pos);
    }
    Ok(Checkpoint {
        order,
        elements,
        state: FlowState {
            t,
            step,
            v,
            expl,
            p,
        },
        projection: ProjectionSpace::from_parts(capacity, reset, xs, axs, since)?,
    })
}

pub fn write_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, checkpoint_bytes(cp))
        .with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    checkpoint_from_bytes(&data).with_context(|| format!("in {}", path.display()))
}

//! Binary mesh container. Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "SEMMESH\0"
//! hdr_len    u32
//! header     hdr_len bytes of UTF-8 JSON
//! "VERT"     num_vertices * 3 f64
//! "ELEM"     num_elements * 8 u64
//! "FACE"     num_facets * (u64 element, u32 face, u32 tag index)
//! "CURV"     num_curved * (u64 element, u32 order, (order+1)^3 * 3 f64)
//! "END\0"
//! ```
//!
//! See `docs/mesh_format.md` for the full description.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryFacet, CurvedElement, Mesh};
use crate::error::{Error, Result};

pub const MESH_MAGIC: &[u8; 8] = b"SEMMESH\0";
pub const MESH_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    endianness: String,
    num_vertices: u64,
    num_elements: u64,
    num_facets: u64,
    num_curved: u64,
    tags: Vec<String>,
}

pub fn write_mesh_bytes(mesh: &Mesh) -> Vec<u8> {
    let tags = mesh.tags();
    let header = Header {
        format: "semflow-mesh".into(),
        version: MESH_VERSION,
        endianness: "little".into(),
        num_vertices: mesh.vertices.len() as u64,
        num_elements: mesh.elements.len() as u64,
        num_facets: mesh.facets.len() as u64,
        num_curved: mesh.curved.len() as u64,
        tags: tags.clone(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MESH_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);

    out.extend_from_slice(b"VERT");
    for v in &mesh.vertices {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out.extend_from_slice(b"ELEM");
    for el in &mesh.elements {
        for &v in el {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
    }
    out.extend_from_slice(b"FACE");
    for f in &mesh.facets {
        let t = tags.iter().position(|t| *t == f.tag).expect("tag listed") as u32;
        out.extend_from_slice(&(f.element as u64).to_le_bytes());
        out.extend_from_slice(&(f.face as u32).to_le_bytes());
        out.extend_from_slice(&t.to_le_bytes());
    }
    out.extend_from_slice(b"CURV");
    for c in &mesh.curved {
        out.extend_from_slice(&(c.element as u64).to_le_bytes());
        out.extend_from_slice(&(c.order as u32).to_le_bytes());
        for p in &c.nodes {
            for x in p {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(b"END\0");
    out
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh_bytes(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    read_mesh_bytes(&std::fs::read(path)?)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(self.err(format!(
                "file truncated in section {} (need {n} bytes, {} left)",
                self.section,
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn index(&mut self, limit: u64, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = self.u64()?;
        if v >= limit {
            return Err(Error::Parse {
                offset: at as u64,
                message: format!("{what} index {v} out of range (< {limit})"),
            });
        }
        Ok(v as usize)
    }

    fn section(&mut self, id: &'static [u8; 4], name: &'static str) -> Result<()> {
        self.section = name;
        let at = self.pos;
        let got = self.take(4)?;
        if got != id {
            return Err(Error::Parse {
                offset: at as u64,
                message: format!(
                    "expected section {name}, found {:?}",
                    String::from_utf8_lossy(got)
                ),
            });
        }
        Ok(())
    }
}

pub fn read_mesh_bytes(data: &[u8]) -> Result<Mesh> {
    let mut cur = Cursor {
        data,
        pos: 0,
        section: "magic",
    };
    if cur.take(8)? != MESH_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "bad magic, not a semflow mesh".into(),
        });
    }
    cur.section = "header";
    let len = cur.u32()? as usize;
    let hdr_at = cur.pos;
    let header: Header = serde_json::from_slice(cur.take(len)?).map_err(|e| Error::Parse {
        offset: hdr_at as u64,
        message: format!("malformed header: {e}"),
    })?;
    if header.version != MESH_VERSION {
        return Err(Error::Parse {
            offset: hdr_at as u64,
            message: format!("unsupported mesh version {}", header.version),
        });
    }
    if header.endianness != "little" {
        return Err(Error::Parse {
            offset: hdr_at as u64,
            message: format!("unsupported endianness `{}`", header.endianness),
        });
    }
    // Counts come from an untrusted header; cap preallocation by file size.
    let cap = |count: u64, bytes: usize| (count as usize).min(data.len() / bytes);

    cur.section(b"VERT", "VERT")?;
    let mut vertices = Vec::with_capacity(cap(header.num_vertices, 24));
    for _ in 0..header.num_vertices {
        vertices.push([cur.f64()?, cur.f64()?, cur.f64()?]);
    }
    cur.section(b"ELEM", "ELEM")?;
    let mut elements = Vec::with_capacity(cap(header.num_elements, 64));
    for _ in 0..header.num_elements {
        let mut el = [0usize; 8];
        for v in &mut el {
            *v = cur.index(header.num_vertices, "vertex")?;
        }
        elements.push(el);
    }
    cur.section(b"FACE", "FACE")?;
    let mut facets = Vec::with_capacity(cap(header.num_facets, 16));
    for _ in 0..header.num_facets {
        let element = cur.index(header.num_elements, "element")?;
        let at = cur.pos;
        let face = cur.u32()?;
        if face > 5 {
            return Err(Error::Parse {
                offset: at as u64,
                message: format!("face index {face} out of range"),
            });
        }
        let at = cur.pos;
        let t = cur.u32()? as usize;
        let tag = header.tags.get(t).cloned().ok_or(Error::Parse {
            offset: at as u64,
            message: format!("tag index {t} out of range"),
        })?;
        facets.push(BoundaryFacet {
            element,
            face: face as u8,
            tag,
        });
    }
    cur.section(b"CURV", "CURV")?;
    let mut curved = Vec::with_capacity(cap(header.num_curved, 12));
    for _ in 0..header.num_curved {
        let element = cur.index(header.num_elements, "element")?;
        let at = cur.pos;
        let order = cur.u32()? as usize;
        if order == 0 || order > 64 {
            return Err(Error::Parse {
                offset: at as u64,
                message: format!("unsupported geometry order {order}"),
            });
        }
        let count = (order + 1).pow(3);
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            nodes.push([cur.f64()?, cur.f64()?, cur.f64()?]);
        }
        curved.push(CurvedElement {
            element,
            order,
            nodes,
        });
    }
    cur.section(b"END\0", "END")?;
    if cur.pos != data.len() {
        return Err(cur.err("trailing bytes after END"));
    }
    Ok(Mesh {
        vertices,
        elements,
        facets,
        curved,
    })
}

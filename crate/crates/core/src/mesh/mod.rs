//! Conforming hexahedral meshes.
//!
//! Corner ordering is lexicographic in reference coordinates: corner
//! `c = i + 2j + 4k` sits at `(r, s, t) = (2i-1, 2j-1, 2k-1)`. Local faces
//! are numbered `0: r=-1, 1: r=+1, 2: s=-1, 3: s=+1, 4: t=-1, 5: t=+1`.

mod generate;
mod io;

pub use generate::{gen_box_mesh, gen_cylinder_box_mesh, BoxSpec, CylinderBoxSpec};
pub use io::{read_mesh, read_mesh_bytes, write_mesh, write_mesh_bytes, MESH_MAGIC, MESH_VERSION};

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Corner indices of each local face, listed in the face's own
/// lexicographic order.
pub const FACE_CORNERS: [[usize; 4]; 6] = [
    [0, 2, 4, 6],
    [1, 3, 5, 7],
    [0, 1, 4, 5],
    [2, 3, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub element: usize,
    pub face: u8,
    pub tag: String,
}

/// Explicit isoparametric geometry for one element: coordinates at the
/// `(order+1)^3` GLL nodes, `r` index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvedElement {
    pub element: usize,
    pub order: usize,
    pub nodes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub facets: Vec<BoundaryFacet>,
    pub curved: Vec<CurvedElement>,
}

/// Neighbor across each local face, `None` on the exterior.
pub type FaceNeighbors = Vec<[Option<(usize, u8)>; 6]>;

impl Mesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Distinct tags in first-appearance order.
    pub fn tags(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for f in &self.facets {
            if !seen.contains(&f.tag) {
                seen.push(f.tag.clone());
            }
        }
        seen
    }

    pub fn curved_record(&self, element: usize) -> Option<&CurvedElement> {
        self.curved.iter().find(|c| c.element == element)
    }

    pub fn face_vertices(&self, element: usize, face: usize) -> [usize; 4] {
        let el = &self.elements[element];
        FACE_CORNERS[face].map(|c| el[c])
    }

    /// Largest distance between two corners of an element.
    pub fn element_diameter(&self, element: usize) -> f64 {
        let el = &self.elements[element];
        let mut d2: f64 = 0.0;
        for a in 0..8 {
            for b in (a + 1)..8 {
                let p = self.vertices[el[a]];
                let q = self.vertices[el[b]];
                let s = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
                d2 = d2.max(s);
            }
        }
        d2.sqrt()
    }

    /// Face adjacency from shared vertex sets.
    pub fn face_neighbors(&self) -> Result<FaceNeighbors> {
        let mut by_key: HashMap<[usize; 4], Vec<(usize, u8)>> = HashMap::new();
        for e in 0..self.elements.len() {
            for f in 0..6 {
                let mut key = self.face_vertices(e, f);
                key.sort_unstable();
                by_key.entry(key).or_default().push((e, f as u8));
            }
        }
        let mut out = vec![[None; 6]; self.elements.len()];
        for (key, owners) in by_key {
            match owners.as_slice() {
                [_] => {}
                [a, b] => {
                    out[a.0][a.1 as usize] = Some(*b);
                    out[b.0][b.1 as usize] = Some(*a);
                }
                _ => {
                    return Err(Error::Topology(format!(
                        "face with vertices {key:?} is shared by {} elements",
                        owners.len()
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Structural checks: index ranges, conforming faces, and exactly one
    /// tag on every exterior face (none on interior faces).
    pub fn validate(&self) -> Result<()> {
        for (e, el) in self.elements.iter().enumerate() {
            if let Some(&v) = el.iter().find(|&&v| v >= self.vertices.len()) {
                return Err(Error::Topology(format!(
                    "element {e} references vertex {v} of {}",
                    self.vertices.len()
                )));
            }
            let distinct: BTreeSet<_> = el.iter().collect();
            if distinct.len() != 8 {
                return Err(Error::Topology(format!("element {e} repeats a vertex")));
            }
        }
        let neighbors = self.face_neighbors()?;
        let mut tagged = vec![[0u8; 6]; self.elements.len()];
        for f in &self.facets {
            if f.element >= self.elements.len() || f.face > 5 {
                return Err(Error::Topology(format!(
                    "facet ({}, {}) does not exist",
                    f.element, f.face
                )));
            }
            if neighbors[f.element][f.face as usize].is_some() {
                return Err(Error::Topology(format!(
                    "interior face ({}, {}) carries tag `{}`",
                    f.element, f.face, f.tag
                )));
            }
            tagged[f.element][f.face as usize] += 1;
        }
        for (e, faces) in neighbors.iter().enumerate() {
            for f in 0..6 {
                let count = tagged[e][f];
                if faces[f].is_none() && count != 1 {
                    return Err(Error::Topology(format!(
                        "exterior face ({e}, {f}) has {count} tags, expected 1"
                    )));
                }
            }
        }
        for c in &self.curved {
            if c.element >= self.elements.len() {
                return Err(Error::Topology(format!(
                    "curved record for missing element {}",
                    c.element
                )));
            }
            if c.order < 1 || c.nodes.len() != (c.order + 1).pow(3) {
                return Err(Error::Topology(format!(
                    "curved record for element {} has {} nodes for order {}",
                    c.element,
                    c.nodes.len(),
                    c.order
                )));
            }
        }
        Ok(())
    }
}

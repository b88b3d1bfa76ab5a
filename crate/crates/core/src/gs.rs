//! Gather-scatter (`QQ^T`) over coincident element-local GLL points.
//!
//! Global numbering comes from geometric coincidence: points closer than
//! `rel_tol * (smallest element diameter)` share a global id. Ids are
//! assigned in lexicographic `(x, y, z)` order of each cluster's first
//! local point, and every reduction walks a cluster in ascending local
//! index, so results do not depend on thread count.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsOptions {
    pub rel_tol: f64,
}

impl Default for GsOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsOp {
    Add,
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct GatherScatter {
    gid: Vec<usize>,
    mult: Vec<f64>,
    inv_mult: Vec<f64>,
    n_global: usize,
    // Clusters with more than one member, flattened; offsets delimit them.
    shared_offsets: Vec<usize>,
    shared_members: Vec<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn lex(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

impl GatherScatter {
    /// Builds the numbering from local point coordinates laid out element by
    /// element with `points_per_element` points each.
    pub fn build(
        mesh: &Mesh,
        coords: &[Vec<f64>; 3],
        points_per_element: usize,
        opts: GsOptions,
    ) -> Result<Self> {
        let n = coords[0].len();
        let nelem = mesh.num_elements();
        check_len(nelem * points_per_element, n)?;
        let min_diam = (0..nelem)
            .map(|e| mesh.element_diameter(e))
            .fold(f64::INFINITY, f64::min);
        let tol = opts.rel_tol * min_diam;
        let cell = 2.0 * tol;
        let pt = |l: usize| [coords[0][l], coords[1][l], coords[2][l]];
        let key = |p: [f64; 3]| p.map(|c| (c / cell).floor() as i64);

        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for l in 0..n {
            grid.entry(key(pt(l))).or_default().push(l);
        }
        let mut uf = UnionFind((0..n).collect());
        for l in 0..n {
            let p = pt(l);
            let k = key(p);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                            continue;
                        };
                        for &m in bucket {
                            if m <= l {
                                continue;
                            }
                            let q = pt(m);
                            let d2: f64 = (0..3).map(|i| (p[i] - q[i]).powi(2)).sum();
                            if d2 <= tol * tol {
                                uf.union(l, m);
                            }
                        }
                    }
                }
            }
        }

        let mut clusters: HashMap<usize, Vec<usize>> = HashMap::new();
        for l in 0..n {
            let r = uf.find(l);
            clusters.entry(r).or_default().push(l);
        }
        let mut groups: Vec<Vec<usize>> = clusters.into_values().collect();
        for g in &mut groups {
            g.sort_unstable();
            let elems: Vec<usize> = g.iter().map(|&l| l / points_per_element).collect();
            for (a, &ea) in elems.iter().enumerate() {
                for &eb in &elems[a + 1..] {
                    if ea == eb {
                        return Err(Error::Topology(format!(
                            "two GLL points of element {ea} coincide near {:?}",
                            pt(g[0])
                        )));
                    }
                    let va: BTreeSet<_> = mesh.elements[ea].iter().collect();
                    if !mesh.elements[eb].iter().any(|v| va.contains(v)) {
                        return Err(Error::Topology(format!(
                            "elements {ea} and {eb} touch at {:?} without sharing a vertex",
                            pt(g[0])
                        )));
                    }
                }
            }
        }
        groups.sort_by(|a, b| lex(&pt(a[0]), &pt(b[0])).then(a[0].cmp(&b[0])));

        let mut gid = vec![0; n];
        let mut mult = vec![1.0; n];
        let mut shared_offsets = vec![0];
        let mut shared_members = Vec::new();
        for (id, g) in groups.iter().enumerate() {
            for &l in g {
                gid[l] = id;
                mult[l] = g.len() as f64;
            }
            if g.len() > 1 {
                shared_members.extend_from_slice(g);
                shared_offsets.push(shared_members.len());
            }
        }
        let inv_mult = mult.iter().map(|m| 1.0 / m).collect();
        Ok(Self {
            gid,
            mult,
            inv_mult,
            n_global: groups.len(),
            shared_offsets,
            shared_members,
        })
    }

    pub fn n_local(&self) -> usize {
        self.gid.len()
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn gid(&self) -> &[usize] {
        &self.gid
    }

    pub fn multiplicity(&self) -> &[f64] {
        &self.mult
    }

    pub fn inv_multiplicity(&self) -> &[f64] {
        &self.inv_mult
    }

    fn shared(&self) -> impl Iterator<Item = &[usize]> {
        self.shared_offsets
            .windows(2)
            .map(move |w| &self.shared_members[w[0]..w[1]])
    }

    pub fn op(&self, u: &mut [f64], op: GsOp) -> Result<()> {
        check_len(self.gid.len(), u.len())?;
        for group in self.shared() {
            let mut acc = u[group[0]];
            for &l in &group[1..] {
                acc = match op {
                    GsOp::Add => acc + u[l],
                    GsOp::Min => acc.min(u[l]),
                    GsOp::Max => acc.max(u[l]),
                };
            }
            for &l in group {
                u[l] = acc;
            }
        }
        Ok(())
    }

    /// `u <- QQ^T u`.
    pub fn add(&self, u: &mut [f64]) -> Result<()> {
        self.op(u, GsOp::Add)
    }

    /// Sum then divide by multiplicity: projection onto continuous fields.
    pub fn avg(&self, u: &mut [f64]) -> Result<()> {
        self.add(u)?;
        for (v, w) in u.iter_mut().zip(&self.inv_mult) {
            *v *= w;
        }
        Ok(())
    }

    /// Inner product counting each global dof once.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.inv_mult)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Sum of a continuous field over unique global dofs.
    pub fn global_sum(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.inv_mult).map(|(x, w)| x * w).sum()
    }
}

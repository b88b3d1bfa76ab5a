//! Preconditioners: point Jacobi on the assembled Helmholtz diagonal, and a
//! hybrid Schwarz method (element-block local solves plus a trilinear
//! coarse space) for the pressure Poisson operator.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gs::GatherScatter;
use crate::operators::{ax_element, AxScratch, HelmholtzCoeffs};
use crate::space::FunctionSpace;

pub trait Preconditioner: Sync {
    /// `z = M^{-1} r` for an assembled, masked residual `r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Dense matrix of one element's Helmholtz operator, row-major, obtained by
/// applying the matrix-free kernel to unit vectors.
pub fn element_matrix(space: &FunctionSpace, coeffs: HelmholtzCoeffs, e: usize) -> Vec<f64> {
    let n = space.n1d();
    let npe = space.points_per_element();
    let r = e * npe..(e + 1) * npe;
    let geom = &space.geom()[r.clone()];
    let mass = &space.mass()[r];
    let d = space.basis().dmat();
    let mut s = AxScratch::new(npe);
    let mut unit = vec![0.0; npe];
    let mut col = vec![0.0; npe];
    let mut out = vec![0.0; npe * npe];
    for q in 0..npe {
        unit[q] = 1.0;
        ax_element(d, n, geom, mass, coeffs, &unit, &mut col, &mut s);
        unit[q] = 0.0;
        for p in 0..npe {
            out[p * npe + q] = col[p];
        }
    }
    out
}

/// Inverse of the assembled operator diagonal.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    inv_diag: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(space: &FunctionSpace, coeffs: HelmholtzCoeffs, mask: &[f64]) -> Result<Self> {
        space.check(mask)?;
        let mut diag = helmholtz_diagonal(space, coeffs);
        space.gs().add(&mut diag)?;
        let mut inv_diag = vec![0.0; diag.len()];
        for (p, &dv) in diag.iter().enumerate() {
            if mask[p] == 0.0 {
                continue;
            }
            if !(dv > 0.0) {
                return Err(Error::NonPositiveDiagonal {
                    point: p,
                    location: space.point(p),
                    value: dv,
                });
            }
            inv_diag[p] = 1.0 / dv;
        }
        Ok(Self { inv_diag })
    }

    pub fn inv_diag(&self) -> &[f64] {
        &self.inv_diag
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Unassembled element diagonal of `lambda_visc D^T G D + lambda_mass B`.
pub fn helmholtz_diagonal(space: &FunctionSpace, coeffs: HelmholtzCoeffs) -> Vec<f64> {
    let n = space.n1d();
    let npe = space.points_per_element();
    let d = space.basis().dmat();
    let geom = space.geom();
    let mass = space.mass();
    let mut out = space.zeros();
    out.par_chunks_mut(npe).enumerate().for_each(|(e, oe)| {
        let g = &geom[e * npe..(e + 1) * npe];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = i + n * (j + n * k);
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += d[a * n + i].powi(2) * g[a + n * (j + n * k)][0];
                        acc += d[a * n + j].powi(2) * g[i + n * (a + n * k)][3];
                        acc += d[a * n + k].powi(2) * g[i + n * (j + n * a)][5];
                    }
                    let (di, dj, dk) = (d[i * n + i], d[j * n + j], d[k * n + k]);
                    acc += 2.0 * (di * dj * g[p][1] + di * dk * g[p][2] + dj * dk * g[p][4]);
                    oe[p] = coeffs.lambda_visc * acc + coeffs.lambda_mass * mass[e * npe + p];
                }
            }
        }
    });
    out
}

/// Sparse symmetric matrix in CSR form.
#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            vals,
        }
    }

    fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.offsets[r]..self.offsets[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .map(|r| {
                (self.offsets[r]..self.offsets[r + 1])
                    .find(|&k| self.cols[k] == r)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

/// Trilinear corner hats sampled at the element GLL points, `npe x 8`.
fn vertex_hats(space: &FunctionSpace) -> Vec<[f64; 8]> {
    let n = space.n1d();
    let xi = space.basis().points();
    let mut out = vec![[0.0; 8]; space.points_per_element()];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let r = [xi[i], xi[j], xi[k]];
                let h = &mut out[i + n * (j + n * k)];
                for (c, hc) in h.iter_mut().enumerate() {
                    *hc = (0..3)
                        .map(|d| {
                            if (c >> d) & 1 == 0 {
                                0.5 * (1.0 - r[d])
                            } else {
                                0.5 * (1.0 + r[d])
                            }
                        })
                        .product();
                }
            }
        }
    }
    out
}

struct LocalSolve {
    /// Element-local point index of each subdomain unknown.
    points: Vec<usize>,
    /// `sqrt(1 / multiplicity)` per unknown.
    weights: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
}

/// Additive Schwarz over element subdomains plus a coarse correction.
///
/// Subdomain `e` holds the unmasked global dofs of element `e`; its matrix
/// is the assembled operator restricted to them, which couples in the
/// neighbors' stiffness and closes with zero values one GLL layer outside.
/// The coarse space is the trilinear vertex space, solved by a fixed number
/// of Jacobi-preconditioned CG iterations started from zero.
pub struct HybridSchwarz {
    npe: usize,
    local: Vec<LocalSolve>,
    hats: Vec<[f64; 8]>,
    /// Coarse dof of each element corner, `None` if masked.
    corner_dofs: Vec<[Option<usize>; 8]>,
    coarse: Csr,
    coarse_inv_diag: Vec<f64>,
    coarse_iters: usize,
    inv_mult: Vec<f64>,
    gs: GatherScatter,
    mask: Vec<f64>,
    use_coarse: bool,
    use_local: bool,
}

impl HybridSchwarz {
    pub fn new(space: &FunctionSpace, mask: &[f64]) -> Result<Self> {
        Self::with_coeffs(space, HelmholtzCoeffs::laplace(), mask, 10)
    }

    pub fn with_coeffs(
        space: &FunctionSpace,
        coeffs: HelmholtzCoeffs,
        mask: &[f64],
        coarse_iters: usize,
    ) -> Result<Self> {
        space.check(mask)?;
        let mesh = space.mesh();
        let npe = space.points_per_element();
        let nelem = space.num_elements();
        let gs = space.gs();
        let gid = gs.gid();

        // Subdomain unknowns and the reverse map gid -> (element, slot).
        let mut points = vec![Vec::new(); nelem];
        let mut owners: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for e in 0..nelem {
            for p in 0..npe {
                let l = e * npe + p;
                if mask[l] != 0.0 {
                    owners.entry(gid[l]).or_default().push((e, points[e].len()));
                    points[e].push(p);
                }
            }
        }
        let mut blocks: Vec<DMatrix<f64>> = points
            .iter()
            .map(|p| DMatrix::zeros(p.len(), p.len()))
            .collect();

        // Coarse numbering over unmasked vertices.
        let hats = vertex_hats(space);
        let n = space.n1d();
        let corner_point = |c: usize| {
            let (i, j, k) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            (i + n * (j + n * k)) * (n - 1)
        };
        let mut vertex_dof: HashMap<usize, Option<usize>> = HashMap::new();
        for e in 0..nelem {
            for c in 0..8 {
                let v = mesh.elements[e][c];
                let masked = mask[e * npe + corner_point(c)] == 0.0;
                let entry = vertex_dof.entry(v).or_insert(Some(0));
                if masked {
                    *entry = None;
                }
            }
        }
        let mut verts: Vec<usize> = vertex_dof
            .iter()
            .filter(|(_, d)| d.is_some())
            .map(|(v, _)| *v)
            .collect();
        verts.sort_unstable();
        for (i, v) in verts.iter().enumerate() {
            vertex_dof.insert(*v, Some(i));
        }
        let corner_dofs: Vec<[Option<usize>; 8]> = (0..nelem)
            .map(|e| std::array::from_fn(|c| vertex_dof[&mesh.elements[e][c]]))
            .collect();
        let mut coarse_rows = vec![BTreeMap::new(); verts.len()];

        for f in 0..nelem {
            let a = element_matrix(space, coeffs, f);
            // Scatter into every subdomain that shares points with f.
            let mut pairs: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for p in 0..npe {
                if let Some(list) = owners.get(&gid[f * npe + p]) {
                    for &(e, slot) in list {
                        pairs.entry(e).or_default().push((p, slot));
                    }
                }
            }
            for (e, pr) in &pairs {
                let b = &mut blocks[*e];
                for &(p, sa) in pr {
                    for &(q, sb) in pr {
                        b[(sa, sb)] += a[p * npe + q];
                    }
                }
            }
            // Coarse element matrix H^T A H.
            let mut ah = vec![[0.0; 8]; npe];
            for p in 0..npe {
                for q in 0..npe {
                    let v = a[p * npe + q];
                    if v != 0.0 {
                        for c in 0..8 {
                            ah[p][c] += v * hats[q][c];
                        }
                    }
                }
            }
            for ca in 0..8 {
                let Some(ia) = corner_dofs[f][ca] else {
                    continue;
                };
                for cb in 0..8 {
                    let Some(ib) = corner_dofs[f][cb] else {
                        continue;
                    };
                    let v: f64 = (0..npe).map(|p| hats[p][ca] * ah[p][cb]).sum();
                    *coarse_rows[ia].entry(ib).or_insert(0.0) += v;
                }
            }
        }

        let mut assembled_mass = space.mass().to_vec();
        gs.add(&mut assembled_mass)?;
        let inv_mult = gs.inv_multiplicity().to_vec();
        let mut local = Vec::with_capacity(nelem);
        for (e, (pts, block)) in points.into_iter().zip(blocks).enumerate() {
            let chol = match Cholesky::new(block.clone()) {
                Some(c) => c,
                None => {
                    let mut shifted = block;
                    for (s, &p) in pts.iter().enumerate() {
                        shifted[(s, s)] += 1e-8 * assembled_mass[e * npe + p];
                    }
                    Cholesky::new(shifted).ok_or_else(|| {
                        Error::Factorization(format!(
                            "Schwarz block of element {e} is not positive definite"
                        ))
                    })?
                }
            };
            let weights = pts.iter().map(|&p| inv_mult[e * npe + p].sqrt()).collect();
            local.push(LocalSolve {
                points: pts,
                weights,
                chol,
            });
        }
        let coarse = Csr::from_rows(coarse_rows);
        let coarse_inv_diag = coarse
            .diagonal()
            .iter()
            .map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 })
            .collect();
        Ok(Self {
            npe,
            local,
            hats,
            corner_dofs,
            coarse,
            coarse_inv_diag,
            coarse_iters,
            inv_mult,
            gs: gs.clone(),
            mask: mask.to_vec(),
            use_coarse: true,
            use_local: true,
        })
    }

    /// Enables or disables the two additive parts, for testing.
    pub fn set_parts(&mut self, local: bool, coarse: bool) {
        self.use_local = local;
        self.use_coarse = coarse;
    }

    pub fn coarse_size(&self) -> usize {
        self.coarse.n()
    }

    fn apply_local(&self, r: &[f64], z: &mut [f64]) {
        let npe = self.npe;
        z.par_chunks_mut(npe)
            .zip(&self.local)
            .enumerate()
            .for_each(|(e, (ze, ls))| {
                ze.fill(0.0);
                let rhs = DVector::from_iterator(
                    ls.points.len(),
                    ls.points
                        .iter()
                        .zip(&ls.weights)
                        .map(|(&p, w)| w * r[e * npe + p]),
                );
                let sol = ls.chol.solve(&rhs);
                for (s, &p) in ls.points.iter().enumerate() {
                    ze[p] = ls.weights[s] * sol[s];
                }
            });
    }

    fn coarse_solve(&self, b: &[f64]) -> Vec<f64> {
        let m = b.len();
        let mut x = vec![0.0; m];
        let mut r = b.to_vec();
        let mut p = vec![0.0; m];
        let mut ap = vec![0.0; m];
        let mut rz_old = 0.0;
        for it in 0..self.coarse_iters {
            let z: Vec<f64> = r
                .iter()
                .zip(&self.coarse_inv_diag)
                .map(|(a, d)| a * d)
                .collect();
            let rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            if rz == 0.0 {
                break;
            }
            let beta = if it == 0 { 0.0 } else { rz / rz_old };
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
            rz_old = rz;
            self.coarse.matvec(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
        }
        x
    }
}

impl Preconditioner for HybridSchwarz {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let npe = self.npe;
        if self.use_local {
            self.apply_local(r, z);
        } else {
            z.fill(0.0);
        }
        if self.use_coarse && self.coarse.n() > 0 {
            let mut rc = vec![0.0; self.coarse.n()];
            for (e, corners) in self.corner_dofs.iter().enumerate() {
                for p in 0..npe {
                    let v = r[e * npe + p] * self.inv_mult[e * npe + p];
                    if v == 0.0 {
                        continue;
                    }
                    for (c, dof) in corners.iter().enumerate() {
                        if let Some(i) = dof {
                            rc[*i] += self.hats[p][c] * v;
                        }
                    }
                }
            }
            let xc = self.coarse_solve(&rc);
            // Local parts are summed by gather-scatter below; pre-divide the
            // (already continuous) coarse part so it survives the sum.
            for (e, corners) in self.corner_dofs.iter().enumerate() {
                for p in 0..npe {
                    let mut acc = 0.0;
                    for (c, dof) in corners.iter().enumerate() {
                        if let Some(i) = dof {
                            acc += self.hats[p][c] * xc[*i];
                        }
                    }
                    z[e * npe + p] += acc * self.inv_mult[e * npe + p];
                }
            }
        }
        self.gs.add(z).expect("length checked by caller");
        for (zi, m) in z.iter_mut().zip(&self.mask) {
            *zi *= m;
        }
    }
}

//! A GLL basis bound to a mesh: coordinates, metrics, geometric factors,
//! mass weights, boundary facet geometry and the gather-scatter numbering.
//!
//! Local layout: element-major, then `i + n*j + n*n*k` with `n = N+1` and
//! `i` running along the first reference direction.

use std::sync::Arc;

use crate::basis::{interp_matrix, Basis1D};
use crate::error::{check_len, Error, Result};
use crate::gs::{GatherScatter, GsOptions};
use crate::mesh::Mesh;

/// Geometry of one tagged boundary facet.
#[derive(Debug, Clone)]
pub struct FacetGeom {
    pub element: usize,
    pub face: u8,
    pub tag: String,
    /// Local point indices (into the full field) of the `(N+1)^2` face points.
    pub points: Vec<usize>,
    /// Outward unit normals of the fluid domain.
    pub normals: Vec<[f64; 3]>,
    /// Surface quadrature weights (`rho_a rho_b |dA|`).
    pub area: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    basis: Basis1D,
    mesh: Arc<Mesh>,
    n: usize,
    npe: usize,
    coords: [Vec<f64>; 3],
    jac: Vec<f64>,
    /// `drdx[p][3*s + l] = d r_s / d x_l`.
    drdx: Vec<[f64; 9]>,
    /// `G_11, G_12, G_13, G_22, G_23, G_33`.
    geom: Vec<[f64; 6]>,
    mass: Vec<f64>,
    facets: Vec<FacetGeom>,
    gs: GatherScatter,
}

/// Local index of face point `(a, b)` on face `face`, within one element.
pub fn face_point(n: usize, face: usize, a: usize, b: usize) -> usize {
    let fixed = if face % 2 == 0 { 0 } else { n - 1 };
    let (i, j, k) = match face / 2 {
        0 => (fixed, a, b),
        1 => (a, fixed, b),
        _ => (a, b, fixed),
    };
    i + n * (j + n * k)
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, basis: Basis1D) -> Result<Self> {
        Self::with_options(mesh, basis, GsOptions::default())
    }

    pub fn with_options(mesh: Arc<Mesh>, basis: Basis1D, gs_opts: GsOptions) -> Result<Self> {
        mesh.validate()?;
        let n = basis.len();
        let npe = n * n * n;
        let nelem = mesh.num_elements();
        let total = nelem * npe;
        let mut coords = [vec![0.0; total], vec![0.0; total], vec![0.0; total]];
        let mut jac = vec![0.0; total];
        let mut drdx = vec![[0.0; 9]; total];
        let mut geom = vec![[0.0; 6]; total];
        let mut mass = vec![0.0; total];
        let xi = basis.points();
        let w = basis.weights();

        for e in 0..nelem {
            let local = element_nodes(&mesh, e, &basis)?;
            let off = e * npe;
            for d in 0..3 {
                coords[d][off..off + npe].copy_from_slice(&local[d]);
            }
            // dx_l/dr_s by applying D along each direction.
            let mut dxdr = [
                [vec![0.0; npe], vec![0.0; npe], vec![0.0; npe]],
                [vec![0.0; npe], vec![0.0; npe], vec![0.0; npe]],
                [vec![0.0; npe], vec![0.0; npe], vec![0.0; npe]],
            ];
            for l in 0..3 {
                let [dr, ds, dt] = &mut dxdr[l];
                grad_ref(basis.dmat(), n, &local[l], dr, ds, dt);
            }
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let p = i + n * (j + n * k);
                        let m = [
                            [dxdr[0][0][p], dxdr[0][1][p], dxdr[0][2][p]],
                            [dxdr[1][0][p], dxdr[1][1][p], dxdr[1][2][p]],
                            [dxdr[2][0][p], dxdr[2][1][p], dxdr[2][2][p]],
                        ];
                        let det = det3(&m);
                        if !(det > 0.0) {
                            return Err(Error::NonPositiveJacobian {
                                element: e,
                                reference: [xi[i], xi[j], xi[k]],
                                det,
                            });
                        }
                        let inv = inv3(&m, det);
                        let gp = off + p;
                        let mut rx = [0.0; 9];
                        for s in 0..3 {
                            for l in 0..3 {
                                rx[3 * s + l] = inv[s][l];
                            }
                        }
                        let wj = w[i] * w[j] * w[k] * det;
                        let g = |s: usize, t: usize| {
                            wj * (0..3).map(|l| rx[3 * s + l] * rx[3 * t + l]).sum::<f64>()
                        };
                        geom[gp] = [g(0, 0), g(0, 1), g(0, 2), g(1, 1), g(1, 2), g(2, 2)];
                        jac[gp] = det;
                        drdx[gp] = rx;
                        mass[gp] = wj;
                    }
                }
            }
        }

        let mut facets = Vec::with_capacity(mesh.facets.len());
        for f in &mesh.facets {
            let e = f.element;
            let face = f.face as usize;
            let dir = face / 2;
            let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
            let mut points = Vec::with_capacity(n * n);
            let mut normals = Vec::with_capacity(n * n);
            let mut area = Vec::with_capacity(n * n);
            for b in 0..n {
                for a in 0..n {
                    let p = e * npe + face_point(n, face, a, b);
                    let rx = &drdx[p];
                    let grad = [rx[3 * dir], rx[3 * dir + 1], rx[3 * dir + 2]];
                    let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
                    points.push(p);
                    normals.push(grad.map(|g| sign * g / norm));
                    area.push(w[a] * w[b] * jac[p] * norm);
                }
            }
            facets.push(FacetGeom {
                element: e,
                face: f.face,
                tag: f.tag.clone(),
                points,
                normals,
                area,
            });
        }

        let gs = GatherScatter::build(&mesh, &coords, npe, gs_opts)?;
        Ok(Self {
            basis,
            mesh,
            n,
            npe,
            coords,
            jac,
            drdx,
            geom,
            mass,
            facets,
            gs,
        })
    }

    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.n - 1
    }

    /// Points per direction, `N + 1`.
    pub fn n1d(&self) -> usize {
        self.n
    }

    pub fn points_per_element(&self) -> usize {
        self.npe
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn n_local(&self) -> usize {
        self.jac.len()
    }

    pub fn coords(&self) -> &[Vec<f64>; 3] {
        &self.coords
    }

    pub fn point(&self, p: usize) -> [f64; 3] {
        [self.coords[0][p], self.coords[1][p], self.coords[2][p]]
    }

    pub fn jacobian(&self) -> &[f64] {
        &self.jac
    }

    pub fn drdx(&self) -> &[[f64; 9]] {
        &self.drdx
    }

    pub fn geom(&self) -> &[[f64; 6]] {
        &self.geom
    }

    /// Diagonal (lumped) mass `rho_i rho_j rho_k J`, element-local.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn facets(&self) -> &[FacetGeom] {
        &self.facets
    }

    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a FacetGeom> + 'a {
        self.facets.iter().filter(move |f| f.tag == tag)
    }

    pub fn gs(&self) -> &GatherScatter {
        &self.gs
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        check_len(self.n_local(), field.len())
    }

    /// Samples `f(x, y, z)` at every local point.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.n_local()).map(|p| f(self.point(p))).collect()
    }

    /// Total volume by GLL quadrature.
    pub fn volume(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `int f dOmega` for an element-local field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mass).map(|(a, b)| a * b).sum()
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.n_local()]
    }
}

/// Reference-coordinate derivatives of one element's nodal values.
pub(crate) fn grad_ref(
    d: &[f64],
    n: usize,
    u: &[f64],
    ur: &mut [f64],
    us: &mut [f64],
    ut: &mut [f64],
) {
    let nn = n * n;
    for k in 0..n {
        for j in 0..n {
            let row = n * (j + n * k);
            for i in 0..n {
                let mut acc = 0.0;
                let di = &d[i * n..(i + 1) * n];
                for a in 0..n {
                    acc += di[a] * u[row + a];
                }
                ur[row + i] = acc;
            }
        }
    }
    for k in 0..n {
        for j in 0..n {
            let dj = &d[j * n..(j + 1) * n];
            for i in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += dj[b] * u[i + n * b + nn * k];
                }
                us[i + n * j + nn * k] = acc;
            }
        }
    }
    for k in 0..n {
        let dk = &d[k * n..(k + 1) * n];
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += dk[c] * u[i + n * j + nn * c];
                }
                ut[i + n * j + nn * k] = acc;
            }
        }
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of `m[l][s] = dx_l/dr_s`, returned as `inv[s][l] = dr_s/dx_l`.
fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let c =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [
            c(1, 2, 1, 2) / det,
            -c(0, 2, 1, 2) / det,
            c(0, 1, 1, 2) / det,
        ],
        [
            -c(1, 2, 0, 2) / det,
            c(0, 2, 0, 2) / det,
            -c(0, 1, 0, 2) / det,
        ],
        [
            c(1, 2, 0, 1) / det,
            -c(0, 2, 0, 1) / det,
            c(0, 1, 0, 1) / det,
        ],
    ]
}

/// Physical coordinates of an element's GLL nodes: the curved record
/// interpolated to this basis when present, the trilinear map otherwise.
fn element_nodes(mesh: &Mesh, e: usize, basis: &Basis1D) -> Result<[Vec<f64>; 3]> {
    let n = basis.len();
    let npe = n * n * n;
    let xi = basis.points();
    let mut out = [vec![0.0; npe], vec![0.0; npe], vec![0.0; npe]];
    if let Some(rec) = mesh.curved_record(e) {
        let g = rec.order + 1;
        if rec.order == basis.order() {
            for (p, node) in rec.nodes.iter().enumerate() {
                for d in 0..3 {
                    out[d][p] = node[d];
                }
            }
            return Ok(out);
        }
        let gb = Basis1D::new(rec.order)?;
        let jm = interp_matrix(&gb, xi)?;
        for d in 0..3 {
            let src: Vec<f64> = rec.nodes.iter().map(|p| p[d]).collect();
            out[d] = tensor_apply(&jm, n, g, &src);
        }
        return Ok(out);
    }
    let el = &mesh.elements[e];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = i + n * (j + n * k);
                let r = [xi[i], xi[j], xi[k]];
                for (c, &v) in el.iter().enumerate() {
                    let mut phi = 1.0;
                    for d in 0..3 {
                        let bit = (c >> d) & 1;
                        phi *= if bit == 0 {
                            0.5 * (1.0 - r[d])
                        } else {
                            0.5 * (1.0 + r[d])
                        };
                    }
                    for d in 0..3 {
                        out[d][p] += phi * mesh.vertices[v][d];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Applies the `m x g` matrix `a` along each of the three directions of a
/// `g^3` block, producing an `m^3` block.
pub(crate) fn tensor_apply(a: &[f64], m: usize, g: usize, u: &[f64]) -> Vec<f64> {
    let mut t1 = vec![0.0; m * g * g];
    for k in 0..g {
        for j in 0..g {
            for i in 0..m {
                let mut acc = 0.0;
                for c in 0..g {
                    acc += a[i * g + c] * u[c + g * (j + g * k)];
                }
                t1[i + m * (j + g * k)] = acc;
            }
        }
    }
    let mut t2 = vec![0.0; m * m * g];
    for k in 0..g {
        for j in 0..m {
            for i in 0..m {
                let mut acc = 0.0;
                for c in 0..g {
                    acc += a[j * g + c] * t1[i + m * (c + g * k)];
                }
                t2[i + m * (j + m * k)] = acc;
            }
        }
    }
    let mut out = vec![0.0; m * m * m];
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let mut acc = 0.0;
                for c in 0..g {
                    acc += a[k * g + c] * t2[i + m * (j + m * c)];
                }
                out[i + m * (j + m * k)] = acc;
            }
        }
    }
    out
}

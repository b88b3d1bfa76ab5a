use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BoundaryFacet, CurvedElement, Mesh};
use crate::basis::Basis1D;
use crate::error::{Error, Result};

/// Axis-aligned box split into `counts` affine hexahedra. `tags` are the
/// facet tags for the `x-, x+, y-, y+, z-, z+` sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub extent: [[f64; 2]; 3],
    pub counts: [usize; 3],
    pub tags: [String; 6],
}

impl BoxSpec {
    /// Unit cube with tags `x0, x1, y0, y1, z0, z1`.
    pub fn unit(counts: [usize; 3]) -> Self {
        Self {
            extent: [[0.0, 1.0]; 3],
            counts,
            tags: ["x0", "x1", "y0", "y1", "z0", "z1"].map(String::from),
        }
    }

    pub fn with_tag(mut self, side: usize, tag: &str) -> Self {
        self.tags[side] = tag.to_string();
        self
    }
}

pub fn gen_box_mesh(spec: &BoxSpec) -> Result<Mesh> {
    for d in 0..3 {
        if spec.counts[d] == 0 {
            return Err(Error::InvalidArgument(format!(
                "element count along axis {d} must be >= 1"
            )));
        }
        let [a, b] = spec.extent[d];
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "degenerate interval [{a}, {b}] along axis {d}"
            )));
        }
    }
    let [nx, ny, nz] = spec.counts;
    let coord = |d: usize, i: usize| {
        let [a, b] = spec.extent[d];
        let n = spec.counts[d];
        if i == n {
            b
        } else {
            a + (b - a) * i as f64 / n as f64
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([coord(0, i), coord(1, j), coord(2, k)]);
            }
        }
    }
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut elements = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut el = [0; 8];
                for (c, v) in el.iter_mut().enumerate() {
                    *v = vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                }
                elements.push(el);
            }
        }
    }
    let eid = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut facets = Vec::new();
    for side in 0..6 {
        let axis = side / 2;
        let upper = side % 2 == 1;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = [i, j, k];
                    let on = if upper {
                        idx[axis] == spec.counts[axis] - 1
                    } else {
                        idx[axis] == 0
                    };
                    if on {
                        facets.push(BoundaryFacet {
                            element: eid(i, j, k),
                            face: side as u8,
                            tag: spec.tags[side].clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(Mesh {
        vertices,
        elements,
        facets,
        curved: Vec::new(),
    })
}

/// Vertical (y-axis) cylinder of diameter `diameter` centred on `x = z = 0`
/// inside a box. An O-grid of `n_theta x n_radial` elements per layer maps
/// the circle onto a square of half-width `square_half_width`; Cartesian
/// blocks fill the rest of the box (`n_upstream`, `n_downstream` along x,
/// `n_side` on each z side). Every O-grid element carries a curved record.
///
/// Element count: `n_vertical * (n_theta*n_radial + (m+n_upstream+n_downstream)*(m+2*n_side) - m^2)`
/// with `m = n_theta / 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderBoxSpec {
    pub diameter: f64,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub square_half_width: f64,
    pub n_theta: usize,
    pub n_radial: usize,
    pub n_vertical: usize,
    pub n_upstream: usize,
    pub n_downstream: usize,
    pub n_side: usize,
    pub geometry_order: usize,
}

impl CylinderBoxSpec {
    pub fn element_count(&self) -> usize {
        let m = self.n_theta / 4;
        let outer = (m + self.n_upstream + self.n_downstream) * (m + 2 * self.n_side) - m * m;
        self.n_vertical * (self.n_theta * self.n_radial + outer)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.diameter > 0.0) {
            return bad(format!("diameter must be positive, got {}", self.diameter));
        }
        if self.n_theta < 4 || self.n_theta % 4 != 0 {
            return bad(format!(
                "n_theta must be a positive multiple of 4, got {}",
                self.n_theta
            ));
        }
        if self.n_radial == 0 || self.n_vertical == 0 || self.geometry_order == 0 {
            return bad("n_radial, n_vertical and geometry_order must be >= 1".into());
        }
        if !(self.y[1] > self.y[0]) {
            return bad("degenerate vertical extent".into());
        }
        let r = 0.5 * self.diameter;
        let l = self.square_half_width;
        if !(l > r) {
            return bad(format!(
                "cylinder radius {r} does not fit inside the O-grid square of half-width {l}"
            ));
        }
        let sides = [
            ("upstream", -self.x[0], self.n_upstream),
            ("downstream", self.x[1], self.n_downstream),
            ("lower span", -self.z[0], self.n_side),
            ("upper span", self.z[1], self.n_side),
        ];
        for (name, dist, count) in sides {
            if dist < l {
                return bad(format!("{name} box side cuts the O-grid square"));
            }
            if dist == l && count != 0 {
                return bad(format!(
                    "{name} side coincides with the square but has {count} blocks"
                ));
            }
            if dist > l && count == 0 {
                return bad(format!(
                    "{name} gap between square and box needs at least one block"
                ));
            }
        }
        if self.n_side == 0 && (-self.z[0] != l || self.z[1] != l) {
            return bad("both span sides must coincide with the square when n_side = 0".into());
        }
        Ok(())
    }
}

struct VertexTable {
    index: HashMap<[i64; 3], usize>,
    vertices: Vec<[f64; 3]>,
    quantum: f64,
}

impl VertexTable {
    fn new(scale: f64) -> Self {
        Self {
            index: HashMap::new(),
            vertices: Vec::new(),
            quantum: 1e-9 * scale,
        }
    }

    fn get(&mut self, p: [f64; 3]) -> usize {
        let key = p.map(|c| (c / self.quantum).round() as i64);
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + (b - a) * i as f64 / n as f64
            }
        })
        .collect()
}

pub fn gen_cylinder_box_mesh(spec: &CylinderBoxSpec) -> Result<Mesh> {
    spec.check()?;
    let r = 0.5 * spec.diameter;
    let l = spec.square_half_width;
    let m = spec.n_theta / 4;
    let scale = (spec.x[1] - spec.x[0])
        .max(spec.z[1] - spec.z[0])
        .max(spec.y[1] - spec.y[0]);
    let mut table = VertexTable::new(scale);
    let mut elements = Vec::new();
    let mut facets = Vec::new();
    let mut curved = Vec::new();
    let ys = uniform(spec.y[0], spec.y[1], spec.n_vertical);
    let gll = Basis1D::new(spec.geometry_order)?;
    let g = gll.len();

    // Point on the square boundary at fraction `phi` through azimuthal cell `a`.
    let square = |a: usize, phi: f64| -> [f64; 2] {
        let side = a / m;
        let s = -l + 2.0 * l * ((a % m) as f64 + phi) / m as f64;
        match side {
            0 => [l, s],
            1 => [-s, l],
            2 => [-l, -s],
            _ => [s, -l],
        }
    };
    let dtheta = 2.0 * PI / spec.n_theta as f64;
    let circle = |a: usize, phi: f64| -> [f64; 2] {
        let theta = -0.25 * PI + (a as f64 + phi) * dtheta;
        [r * theta.cos(), r * theta.sin()]
    };
    // (x, z) of the O-grid map at azimuthal fraction `phi` and radial
    // fraction `rho` in ring `ring`.
    let ogrid = |a: usize, ring: usize, phi: f64, rho: f64| -> [f64; 2] {
        let t = (ring as f64 + rho) / spec.n_radial as f64;
        let c = circle(a, phi);
        let s = square(a, phi);
        [(1.0 - t) * c[0] + t * s[0], (1.0 - t) * c[1] + t * s[1]]
    };

    for layer in 0..spec.n_vertical {
        let (y0, y1) = (ys[layer], ys[layer + 1]);
        for ring in 0..spec.n_radial {
            for a in 0..spec.n_theta {
                let e = elements.len();
                let mut el = [0usize; 8];
                for (c, v) in el.iter_mut().enumerate() {
                    let p = ogrid(a, ring, (c & 1) as f64, ((c >> 1) & 1) as f64);
                    let y = if c >> 2 == 0 { y0 } else { y1 };
                    *v = table.get([p[0], y, p[1]]);
                }
                elements.push(el);
                let mut nodes = Vec::with_capacity(g * g * g);
                for k in 0..g {
                    let y = y0 + 0.5 * (gll.points()[k] + 1.0) * (y1 - y0);
                    let y = if k == 0 {
                        y0
                    } else if k == g - 1 {
                        y1
                    } else {
                        y
                    };
                    for j in 0..g {
                        let rho = 0.5 * (gll.points()[j] + 1.0);
                        for i in 0..g {
                            let phi = 0.5 * (gll.points()[i] + 1.0);
                            let p = ogrid(a, ring, phi, rho);
                            nodes.push([p[0], y, p[1]]);
                        }
                    }
                }
                curved.push(CurvedElement {
                    element: e,
                    order: spec.geometry_order,
                    nodes,
                });
                if ring == 0 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 2,
                        tag: "cylinder".into(),
                    });
                }
                if ring == spec.n_radial - 1 {
                    let side = a / m;
                    let exterior = match side {
                        0 => spec.n_downstream == 0,
                        2 => spec.n_upstream == 0,
                        _ => spec.n_side == 0,
                    };
                    if exterior {
                        let tag = match side {
                            0 => "outflow",
                            2 => "inflow",
                            _ => "span",
                        };
                        facets.push(BoundaryFacet {
                            element: e,
                            face: 3,
                            tag: tag.into(),
                        });
                    }
                }
                if layer == 0 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 4,
                        tag: "bottom".into(),
                    });
                }
                if layer == spec.n_vertical - 1 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 5,
                        tag: "top".into(),
                    });
                }
            }
        }

        // Cartesian blocks around the square.
        let mut xs = uniform(spec.x[0], -l, spec.n_upstream);
        xs.pop();
        xs.extend(uniform(-l, l, m));
        xs.pop();
        xs.extend(uniform(l, spec.x[1], spec.n_downstream));
        let mut zs = uniform(spec.z[0], -l, spec.n_side);
        zs.pop();
        zs.extend(uniform(-l, l, m));
        zs.pop();
        zs.extend(uniform(l, spec.z[1], spec.n_side));
        let (ix0, ix1) = (spec.n_upstream, spec.n_upstream + m);
        let (iz0, iz1) = (spec.n_side, spec.n_side + m);
        let nx = xs.len() - 1;
        let nz = zs.len() - 1;
        for kz in 0..nz {
            for ix in 0..nx {
                if (ix0..ix1).contains(&ix) && (iz0..iz1).contains(&kz) {
                    continue;
                }
                let e = elements.len();
                let mut el = [0usize; 8];
                for (c, v) in el.iter_mut().enumerate() {
                    let x = xs[ix + (c & 1)];
                    let y = if (c >> 1) & 1 == 0 { y0 } else { y1 };
                    let z = zs[kz + ((c >> 2) & 1)];
                    *v = table.get([x, y, z]);
                }
                elements.push(el);
                if ix == 0 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 0,
                        tag: "inflow".into(),
                    });
                }
                if ix == nx - 1 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 1,
                        tag: "outflow".into(),
                    });
                }
                if layer == 0 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 2,
                        tag: "bottom".into(),
                    });
                }
                if layer == spec.n_vertical - 1 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 3,
                        tag: "top".into(),
                    });
                }
                if kz == 0 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 4,
                        tag: "span".into(),
                    });
                }
                if kz == nz - 1 {
                    facets.push(BoundaryFacet {
                        element: e,
                        face: 5,
                        tag: "span".into(),
                    });
                }
            }
        }
    }

    let mesh = Mesh {
        vertices: table.vertices,
        elements,
        facets,
        curved,
    };
    debug_assert_eq!(mesh.num_elements(), spec.element_count());
    mesh.validate()?;
    Ok(mesh)
}

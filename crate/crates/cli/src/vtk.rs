//! Legacy VTK (binary, big-endian) snapshots. Every element contributes its
//! `(N+1)^3` GLL points and `N^3` linear hexahedra; shared points are
//! duplicated. See `docs/vtk_output.md`.

use std::io::Write;
use std::path::Path;

use anyhow::{ensure, Context, Result};

use semflow_core::FunctionSpace;

const VTK_HEXAHEDRON: i32 = 12;

fn be_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_be_bytes());
}

fn be_i32(out: &mut Vec<u8>, x: i32) {
    out.extend_from_slice(&x.to_be_bytes());
}

pub fn vtk_bytes(
    space: &FunctionSpace,
    v: &[Vec<f64>; 3],
    p: &[f64],
    title: &str,
) -> Result<Vec<u8>> {
    let n_pts = space.n_local();
    ensure!(
        v.iter().all(|c| c.len() == n_pts) && p.len() == n_pts,
        "field length mismatch"
    );
    ensure!(n_pts <= i32::MAX as usize, "too many points for legacy VTK");
    let n = space.n1d();
    let npe = space.points_per_element();
    let cells_per = (n - 1).pow(3);
    let n_cells = space.num_elements() * cells_per;
    let mut out = Vec::with_capacity(n_pts * 56 + n_cells * 40 + 256);
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    write!(
        out,
        "# vtk DataFile Version 3.0\n{title}\nBINARY\nDATASET UNSTRUCTURED_GRID\n"
    )?;
    writeln!(out, "POINTS {n_pts} double")?;
    let x = space.coords();
    for q in 0..n_pts {
        for c in x {
            be_f64(&mut out, c[q]);
        }
    }
    writeln!(out, "\nCELLS {n_cells} {}", n_cells * 9)?;
    let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    for e in 0..space.num_elements() {
        for k in 0..n - 1 {
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    be_i32(&mut out, 8);
                    for (a, b, c) in [
                        (0, 0, 0),
                        (1, 0, 0),
                        (1, 1, 0),
                        (0, 1, 0),
                        (0, 0, 1),
                        (1, 0, 1),
                        (1, 1, 1),
                        (0, 1, 1),
                    ] {
                        be_i32(&mut out, (e * npe + idx(i + a, j + b, k + c)) as i32);
                    }
                }
            }
        }
    }
    writeln!(out, "\nCELL_TYPES {n_cells}")?;
    for _ in 0..n_cells {
        be_i32(&mut out, VTK_HEXAHEDRON);
    }
    writeln!(out, "\nPOINT_DATA {n_pts}\nVECTORS velocity double")?;
    for q in 0..n_pts {
        for c in v {
            be_f64(&mut out, c[q]);
        }
    }
    writeln!(out, "\nSCALARS pressure double 1\nLOOKUP_TABLE default")?;
    for &pq in p {
        be_f64(&mut out, pq);
    }
    out.push(b'\n');
    Ok(out)
}

pub fn write_vtk(
    path: &Path,
    space: &FunctionSpace,
    v: &[Vec<f64>; 3],
    p: &[f64],
    title: &str,
) -> Result<()> {
    std::fs::write(path, vtk_bytes(space, v, p, title)?)
        .with_context(|| format!("writing {}", path.display()))
}

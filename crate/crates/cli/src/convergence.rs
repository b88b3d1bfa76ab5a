//! Convergence suites behind `semflow convergence <suite>`.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Result};

use semflow_core::analytic::{observed_orders, taylor_green_study, TaylorGreen, TaylorGreenRun};
use semflow_core::gs::GsOp;
use semflow_core::mesh::{gen_box_mesh, BoxSpec};
use semflow_core::timestep::{ax_helmholtz_assembled, FlowParams};
use semflow_core::{
    pcg, Basis1D, BlockJacobi, FunctionSpace, HelmholtzCoeffs, Preconditioner, SolverConfig,
};

use crate::output::{fmt, StepCsv};

pub const SUITES: [&str; 2] = ["taylor-green", "poisson"];

pub const TG_NU: f64 = 1.0;
pub const TG_ELEMENTS: usize = 4;
pub const TG_ORDER: usize = 7;
pub const TG_END: f64 = 0.1;
pub const TG_DTS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// Tolerances tight enough that solver error stays below the temporal error.
pub fn tight_solvers(p: &mut FlowParams) {
    p.pressure.abs_tol = 1e-10;
    p.pressure.max_iter = 500;
    p.velocity.abs_tol = 1e-12;
    p.velocity.max_iter = 500;
}

pub fn taylor_green_table() -> Result<Vec<TaylorGreenRun>> {
    Ok(taylor_green_study(
        TaylorGreen { nu: TG_NU },
        TG_ELEMENTS,
        TG_ORDER,
        TG_END,
        &TG_DTS,
        tight_solvers,
    )?)
}

/// `L2` error of the Galerkin solution of `-lap u = 3 pi^2 u` with
/// `u = sin(pi x) sin(pi y) sin(pi z)` on the unit cube with `2^3`
/// elements.
pub fn poisson_error(order: usize) -> Result<f64> {
    let mesh = gen_box_mesh(&BoxSpec::unit([2, 2, 2]))?;
    let s = FunctionSpace::new(std::sync::Arc::new(mesh), Basis1D::new(order)?)?;
    let mut mask = vec![1.0; s.n_local()];
    for f in s.facets() {
        for &p in &f.points {
            mask[p] = 0.0;
        }
    }
    s.gs().op(&mut mask, GsOp::Min)?;
    let exact = s.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin());
    let mut rhs: Vec<f64> = exact
        .iter()
        .zip(s.mass())
        .map(|(u, m)| 3.0 * PI * PI * u * m)
        .collect();
    s.gs().add(&mut rhs)?;
    rhs.iter_mut().zip(&mask).for_each(|(r, m)| *r *= m);
    let h = HelmholtzCoeffs::laplace();
    let pc = BlockJacobi::new(&s, h, &mask)?;
    let mut x = s.zeros();
    let cfg = SolverConfig::new(1e-14, 5000, 10)?;
    let st = pcg(
        &mut |u, w| ax_helmholtz_assembled(&s, h, &mask, u, w),
        &mut |r, z| pc.apply(r, z),
        &rhs,
        &mut x,
        &cfg,
        &mask,
        s.gs(),
    )?;
    if !st.converged {
        log::warn!("poisson N={order}: residual {:e}", st.final_residual);
    }
    let e2: Vec<f64> = x.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).collect();
    Ok(s.integrate(&e2).sqrt())
}

pub fn poisson_table(orders: &[usize]) -> Result<Vec<(usize, f64)>> {
    orders.iter().map(|&n| Ok((n, poisson_error(n)?))).collect()
}

pub fn run_suite(name: &str, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    match name {
        "taylor-green" => {
            let runs = taylor_green_table()?;
            let err: Vec<f64> = runs.iter().map(|r| r.l2_error).collect();
            let div: Vec<f64> = runs.iter().map(|r| r.divergence).collect();
            let (oe, od) = (observed_orders(&err), observed_orders(&div));
            let header = [
                "dt",
                "steps",
                "l2_error",
                "linf_error",
                "divergence",
                "order_l2",
                "order_div",
                "shell0",
                "shell1",
                "shell2",
                "pressure_iters",
            ];
            let (mut w, _) =
                StepCsv::open(&out_dir.join("convergence_taylor_green.csv"), &header, None)?;
            println!(
                "{:>8} {:>6} {:>12} {:>12} {:>8} {:>8}",
                "dt", "steps", "l2", "div", "q_l2", "q_div"
            );
            for (i, r) in runs.iter().enumerate() {
                let q = |v: &[f64]| {
                    if i == 0 {
                        String::new()
                    } else {
                        format!("{:.3}", v[i - 1])
                    }
                };
                let mut row = vec![
                    fmt(r.dt),
                    r.steps.to_string(),
                    fmt(r.l2_error),
                    fmt(r.linf_error),
                    fmt(r.divergence),
                ];
                row.push(q(&oe));
                row.push(q(&od));
                row.extend(r.shells.iter().map(|&x| fmt(x)));
                row.push(r.pressure_iterations.to_string());
                w.row(&row)?;
                println!(
                    "{:>8} {:>6} {:>12.4e} {:>12.4e} {:>8} {:>8}",
                    r.dt,
                    r.steps,
                    r.l2_error,
                    r.divergence,
                    q(&oe),
                    q(&od)
                );
            }
            w.flush()?;
        }
        "poisson" => {
            let rows = poisson_table(&[3, 5, 7, 9, 11])?;
            let (mut w, _) = StepCsv::open(
                &out_dir.join("convergence_poisson.csv"),
                &["order", "l2_error"],
                None,
            )?;
            for (n, e) in rows {
                w.row(&[n.to_string(), fmt(e)])?;
                println!("N={n:<3} L2 error {e:.4e}");
            }
            w.flush()?;
        }
        other => bail!("unknown suite {other:?}; available: {}", SUITES.join(", ")),
    }
    Ok(())
}

//! One-dimensional Gauss-Lobatto-Legendre nodal basis.
//!
//! All tensor-product operators are built from three pieces of 1D data: the
//! GLL points on `[-1, 1]`, their quadrature weights and the nodal
//! differentiation matrix `D_ij = l_j'(xi_i)`.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre polynomial `P_n(x)` together with `P_{n-1}(x)`.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    (p, p_prev)
}

/// Derivative `P_n'(x)`, valid on the closed interval.
pub fn legendre_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (p, p_prev) = legendre(n, x);
    if (1.0 - x.abs()) < 1e-15 {
        let s = if x > 0.0 {
            1.0
        } else {
            (-1.0f64).powi(n as i32 + 1)
        };
        return s * (n * (n + 1)) as f64 / 2.0;
    }
    n as f64 * (p_prev - x * p) / (1.0 - x * x)
}

/// Immutable 1D GLL basis of polynomial order `N` (N+1 nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1D {
    order: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    dmat: Vec<f64>,
    bary: Vec<f64>,
}

impl Basis1D {
    /// GLL points are the roots of `(1 - x^2) P_N'(x)`, found by Newton
    /// iteration seeded with Chebyshev-Gauss-Lobatto points.
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidArgument(format!(
                "polynomial order must be >= 1, got {order}"
            )));
        }
        let n = order;
        let np = n + 1;
        let mut points = vec![0.0; np];
        for (i, pt) in points.iter_mut().enumerate() {
            let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
            if i == 0 || i == n {
                *pt = if i == 0 { -1.0 } else { 1.0 };
                continue;
            }
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (p, p_prev) = legendre(n, x);
                let dx = (x * p - p_prev) / ((n + 1) as f64 * p);
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::RootFinding { order: n, root: i });
            }
            *pt = x;
        }
        // Symmetrize; the Newton iterates agree to rounding.
        for i in 0..np / 2 {
            let a = 0.5 * (points[np - 1 - i] - points[i]);
            points[i] = -a;
            points[np - 1 - i] = a;
        }
        if np % 2 == 1 {
            points[n / 2] = 0.0;
        }

        let nn1 = (n * (n + 1)) as f64;
        let weights: Vec<f64> = points
            .iter()
            .map(|&x| {
                let (p, _) = legendre(n, x);
                2.0 / (nn1 * p * p)
            })
            .collect();

        let bary = barycentric_weights(&points);

        // Off-diagonal entries from the closed form, diagonal from the
        // negative row sum so that D annihilates constants to rounding.
        let pn: Vec<f64> = points.iter().map(|&x| legendre(n, x).0).collect();
        let mut dmat = vec![0.0; np * np];
        for i in 0..np {
            let mut row_sum = 0.0;
            for j in 0..np {
                if i != j {
                    let d = pn[i] / (pn[j] * (points[i] - points[j]));
                    dmat[i * np + j] = d;
                    row_sum += d;
                }
            }
            dmat[i * np + i] = -row_sum;
        }

        Ok(Self {
            order,
            points,
            weights,
            dmat,
            bary,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major `(N+1) x (N+1)` differentiation matrix.
    pub fn dmat(&self) -> &[f64] {
        &self.dmat
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dmat[i * self.len() + j]
    }

    /// Value of the Lagrange interpolant `l_j` at `x`.
    pub fn lagrange(&self, j: usize, x: f64) -> f64 {
        lagrange_row(&self.points, &self.bary, x)[j]
    }

    /// Reference spacing used by the CFL estimate at node `i`: the gap to
    /// the next node, or to the previous one for the last node.
    pub fn spacing(&self, i: usize) -> f64 {
        let n = self.order;
        if i < n {
            self.points[i + 1] - self.points[i]
        } else {
            self.points[n] - self.points[n - 1]
        }
    }
}

/// Returns the differentiation matrix of `basis` (row-major copy).
pub fn diff_matrix(basis: &Basis1D) -> Vec<f64> {
    basis.dmat.clone()
}

/// `J_kj = l_j(target_k)`, row-major `targets.len() x (N+1)`.
pub fn interp_matrix(from: &Basis1D, to_points: &[f64]) -> Result<Vec<f64>> {
    let np = from.len();
    let mut out = Vec::with_capacity(to_points.len() * np);
    for &t in to_points {
        if !(-1.0..=1.0).contains(&t) || t.is_nan() {
            return Err(Error::OutsideReference { value: t });
        }
        out.extend(lagrange_row(&from.points, &from.bary, t));
    }
    Ok(out)
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| nodes[j] - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

fn lagrange_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    if let Some(hit) = nodes.iter().position(|&xi| xi == x) {
        row[hit] = 1.0;
        return row;
    }
    let mut denom = 0.0;
    for (j, (&xj, &wj)) in nodes.iter().zip(bary).enumerate() {
        let t = wj / (x - xj);
        row[j] = t;
        denom += t;
    }
    for v in &mut row {
        *v /= denom;
    }
    row
}

/// Gauss-Legendre points and weights with `m` nodes.
pub fn gauss_legendre(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 1 {
        return Err(Error::InvalidArgument(
            "need at least one Gauss point".into(),
        ));
    }
    let mut points = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Ascending order; Chebyshev-Gauss seed.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, _) = legendre(m, x);
            let dp = legendre_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootFinding { order: m, root: i });
        }
        let dp = legendre_derivative(m, x);
        points[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Ok((points, weights))
}

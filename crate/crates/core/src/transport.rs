//! x-transport of cell-centered scalars carrying `nr` components per cell
//! (one for the monomer field, one per chain-length cell for `psi`).
//!
//! Each update is written as a combination of old values with nonnegative
//! coefficients, so nonnegative input stays nonnegative exactly, not just up
//! to roundoff.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    /// MUSCL reconstruction with the minmod limiter; positive for Courant <= 1/2.
    Minmod,
}

/// Outflow Courant number of the upwind scheme, `max_c dt sum(outgoing face speed) / h`.
pub fn advective_courant(grid: &SpatialGrid, u: &[f64], w: &[f64], dt: f64) -> f64 {
    let mut m = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let out = u[grid.u_idx(i + 1, j)].max(0.0) / grid.dx - u[grid.u_idx(i, j)].min(0.0) / grid.dx
                + w[grid.w_idx(i, j + 1)].max(0.0) / grid.dy
                - w[grid.w_idx(i, j)].min(0.0) / grid.dy;
            m = m.max(dt * out);
        }
    }
    m
}

/// Conservative first-order upwind advection by the face velocities.
pub fn advect_upwind(
    grid: &SpatialGrid,
    u: &[f64],
    w: &[f64],
    dt: f64,
    nr: usize,
    data: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let courant = advective_courant(grid, u, w, dt);
    if courant > 1.0 {
        return Err(Error::Cfl {
            limit: "advective",
            dt,
            required: dt / courant,
        });
    }
    let (nx, lx, ly) = (grid.nx, dt / grid.dx, dt / grid.dy);
    out.par_chunks_mut(nr).enumerate().for_each(|(c, o)| {
        let (i, j) = (c % nx, c / nx);
        let ue = u[grid.u_idx(i + 1, j)];
        let uw = u[grid.u_idx(i, j)];
        let wn = w[grid.w_idx(i, j + 1)];
        let ws = w[grid.w_idx(i, j)];
        let keep = 1.0 - (lx * (ue.max(0.0) - uw.min(0.0)) + ly * (wn.max(0.0) - ws.min(0.0)));
        let own = &data[c * nr..(c + 1) * nr];
        for (k, v) in o.iter_mut().enumerate() {
            *v = keep * own[k];
        }
        // inflow from each neighbor with a nonnegative weight
        let mut inflow = |nb: Option<usize>, weight: f64| {
            if weight > 0.0 {
                if let Some(n) = nb {
                    let src = &data[n * nr..(n + 1) * nr];
                    for (k, v) in o.iter_mut().enumerate() {
                        *v += weight * src[k];
                    }
                }
            }
        };
        inflow(grid.left(i).map(|l| grid.cell(l, j)), lx * uw.max(0.0));
        inflow(grid.right(i).map(|r| grid.cell(r, j)), -lx * ue.min(0.0));
        inflow(grid.down(j).map(|d| grid.cell(i, d)), ly * ws.max(0.0));
        inflow(grid.up(j).map(|up| grid.cell(i, up)), -ly * wn.min(0.0));
    });
    Ok(())
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Second-order MUSCL/minmod advection in flux form (forward Euler).
pub fn advect_minmod(
    grid: &SpatialGrid,
    u: &[f64],
    w: &[f64],
    dt: f64,
    nr: usize,
    data: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let courant = advective_courant(grid, u, w, dt);
    if courant > 0.5 {
        return Err(Error::Cfl {
            limit: "advective (minmod)",
            dt,
            required: 0.5 * dt / courant,
        });
    }
    let nx = grid.nx;
    let at = |c: Option<usize>, k: usize| c.map(|c| data[c * nr + k]);
    // upwind-biased face value with limited slope; missing neighbors (walls)
    // make the slope zero
    let face = |up: usize, upup: Option<usize>, down: Option<usize>, k: usize| -> f64 {
        let cu = data[up * nr + k];
        match (at(upup, k), at(down, k)) {
            (Some(a), Some(b)) => cu + 0.5 * minmod(cu - a, b - cu),
            _ => cu,
        }
    };
    out.par_chunks_mut(nr).enumerate().for_each(|(c, o)| {
        let (i, j) = (c % nx, c / nx);
        let cell = |i: Option<usize>, j: Option<usize>| match (i, j) {
            (Some(i), Some(j)) => Some(grid.cell(i, j)),
            _ => None,
        };
        let l = grid.left(i);
        let r = grid.right(i);
        let d = grid.down(j);
        let up = grid.up(j);
        let ue = u[grid.u_idx(i + 1, j)];
        let uw = u[grid.u_idx(i, j)];
        let wn = w[grid.w_idx(i, j + 1)];
        let ws = w[grid.w_idx(i, j)];
        for k in 0..nr {
            let here = data[c * nr + k];
            let fe = if ue >= 0.0 {
                ue * face(c, cell(l, Some(j)), cell(r, Some(j)), k)
            } else {
                let rc = cell(r, Some(j)).expect("inflow through a wall face");
                ue * face(rc, cell(r.and_then(|r| grid.right(r)), Some(j)), Some(c), k)
            };
            let fw = if uw >= 0.0 {
                let lc = cell(l, Some(j));
                match lc {
                    Some(lc) => uw * face(lc, cell(l.and_then(|l| grid.left(l)), Some(j)), Some(c), k),
                    None => 0.0,
                }
            } else {
                uw * face(c, cell(r, Some(j)), cell(l, Some(j)), k)
            };
            let fnn = if wn >= 0.0 {
                wn * face(c, cell(Some(i), d), cell(Some(i), up), k)
            } else {
                let uc = cell(Some(i), up).expect("inflow through a wall face");
                wn * face(uc, cell(Some(i), up.and_then(|u| grid.up(u))), Some(c), k)
            };
            let fs = if ws >= 0.0 {
                match cell(Some(i), d) {
                    Some(dc) => ws * face(dc, cell(Some(i), d.and_then(|d| grid.down(d))), Some(c), k),
                    None => 0.0,
                }
            } else {
                ws * face(c, cell(Some(i), up), cell(Some(i), d), k)
            };
            o[k] = here - dt * ((fe - fw) / grid.dx + (fnn - fs) / grid.dy);
        }
    });
    Ok(())
}

pub fn advect(
    scheme: AdvectionScheme,
    grid: &SpatialGrid,
    u: &[f64],
    w: &[f64],
    dt: f64,
    nr: usize,
    data: &[f64],
    out: &mut [f64],
) -> Result<()> {
    match scheme {
        AdvectionScheme::Upwind => advect_upwind(grid, u, w, dt, nr, data, out),
        AdvectionScheme::Minmod => advect_minmod(grid, u, w, dt, nr, data, out),
    }
}

/// Number of explicit sub-steps that keeps `dt D (2/dx^2 + 2/dy^2) <= 1/2`.
pub fn diffusion_substeps(grid: &SpatialGrid, d_max: f64, dt: f64) -> usize {
    let lam = dt * d_max * (2.0 / (grid.dx * grid.dx) + 2.0 / (grid.dy * grid.dy));
    (lam / 0.5).ceil().max(1.0) as usize
}

/// Explicit diffusion with per-component coefficient `coef[k]`, homogeneous
/// Neumann walls, sub-cycled so that every sub-step is a positive combination.
/// Returns the number of sub-steps taken.
pub fn diffuse(
    grid: &SpatialGrid,
    coef: &[f64],
    dt: f64,
    nr: usize,
    data: &mut [f64],
    scratch: &mut Vec<f64>,
) -> usize {
    let d_max = coef.iter().fold(0.0f64, |m, &c| m.max(c));
    if d_max == 0.0 {
        return 0;
    }
    let n = diffusion_substeps(grid, d_max, dt);
    let h = dt / n as f64;
    let (nx, ax, ay) = (grid.nx, h / (grid.dx * grid.dx), h / (grid.dy * grid.dy));
    scratch.resize(data.len(), 0.0);
    for _ in 0..n {
        scratch.copy_from_slice(data);
        let src = &*scratch;
        data.par_chunks_mut(nr).enumerate().for_each(|(c, o)| {
            let (i, j) = (c % nx, c / nx);
            let nbs = [
                (grid.left(i).map(|l| grid.cell(l, j)), ax),
                (grid.right(i).map(|r| grid.cell(r, j)), ax),
                (grid.down(j).map(|d| grid.cell(i, d)), ay),
                (grid.up(j).map(|u| grid.cell(i, u)), ay),
            ];
            let total: f64 = nbs.iter().filter(|(n, _)| n.is_some()).map(|(_, a)| a).sum();
            let own = &src[c * nr..(c + 1) * nr];
            for k in 0..nr {
                o[k] = (1.0 - coef[k] * total) * own[k];
            }
            for (nb, a) in nbs {
                if let Some(nb) = nb {
                    let s = &src[nb * nr..(nb + 1) * nr];
                    for k in 0..nr {
                        o[k] += coef[k] * a * s[k];
                    }
                }
            }
        });
    }
    n
}

/// `sum_c |grad f|^2 dA` over interior faces (zero flux through walls).
pub fn gradient_energy(grid: &SpatialGrid, f: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = f[grid.cell(i, j)];
            if let Some(r) = grid.right(i) {
                let d = (f[grid.cell(r, j)] - c) / grid.dx;
                s += d * d;
            }
            if let Some(u) = grid.up(j) {
                let d = (f[grid.cell(i, u)] - c) / grid.dy;
                s += d * d;
            }
        }
    }
    s * grid.cell_area()
}

//! Incompressible momentum equation on the MAC grid: centered conservative
//! advection, variable-viscosity stress, Navier slip on walls, AB2 in time and
//! a pressure projection each step.

mod energy;
mod poisson;
mod stress;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Boundary, SpatialGrid};
use crate::model::ModelCoefficients;

pub use energy::{energy_terms, kinetic_energy, EnergyAudit, EnergyTerms};
pub use poisson::{laplacian, PoissonSolver};
pub use stress::{compute_stress_field, StressField};

/// Face-normal velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl Velocity {
    pub fn zeros(grid: &SpatialGrid) -> Self {
        Velocity {
            u: vec![0.0; grid.n_u()],
            w: vec![0.0; grid.n_w()],
        }
    }

    /// Samples `(fu, fw)` at the face positions, then enforces periodic
    /// duplicates and zero wall-normal velocity.
    pub fn from_fn(grid: &SpatialGrid, fu: impl Fn(f64, f64) -> f64, fw: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = Velocity::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let (x, y) = grid.u_pos(i, j);
                v.u[grid.u_idx(i, j)] = fu(x, y);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.w_pos(i, j);
                v.w[grid.w_idx(i, j)] = fw(x, y);
            }
        }
        grid.sync_faces(&mut v.u, &mut v.w);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.w).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// External body force `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BodyForce {
    #[default]
    None,
    Uniform {
        fx: f64,
        fy: f64,
    },
    /// `f = (amplitude sin(2 pi mode y / Ly), 0)`
    Kolmogorov {
        amplitude: f64,
        mode: u32,
    },
}

impl BodyForce {
    pub fn at(&self, grid: &SpatialGrid, _x: f64, y: f64) -> [f64; 2] {
        match *self {
            BodyForce::None => [0.0, 0.0],
            BodyForce::Uniform { fx, fy } => [fx, fy],
            BodyForce::Kolmogorov { amplitude, mode } => [
                amplitude * (2.0 * std::f64::consts::PI * mode as f64 * y / grid.ly).sin(),
                0.0,
            ],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BodyForce::None)
    }

    /// Force sampled on the faces (x-component on x-faces, y on y-faces).
    pub fn faces(&self, grid: &SpatialGrid) -> Velocity {
        let mut f = Velocity::from_fn(grid, |x, y| self.at(grid, x, y)[0], |x, y| self.at(grid, x, y)[1]);
        grid.sync_faces(&mut f.u, &mut f.w);
        f
    }
}

/// Previous explicit tendency for the Adams-Bashforth extrapolation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FluidHistory {
    pub hu: Vec<f64>,
    pub hw: Vec<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidStepReport {
    pub poisson_iterations: usize,
    /// `max |div v| h / max |v|` after projection.
    pub divergence: f64,
    pub max_nu: f64,
}

/// Explicit tendency `-div(v (x) v) + div S` on the active faces.
pub fn momentum_rhs(grid: &SpatialGrid, s: &StressField, u: &[f64], w: &[f64], hu: &mut [f64], hw: &mut [f64]) {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx, grid.dy);
    let x_wall = grid.bx == Boundary::SlipWall;
    let y_wall = grid.by == Boundary::SlipWall;
    // advective flux at corner (i, j), shared by both components: wbar_x * ubar_y;
    // it vanishes on walls where the normal velocity is zero
    let fc = |i: usize, j: usize| -> f64 {
        if (x_wall && (i == 0 || i == nx)) || (y_wall && (j == 0 || j == ny)) {
            return 0.0;
        }
        let ih = if i == nx { 0 } else { i };
        let jh = if j == ny { 0 } else { j };
        let im = if ih == 0 { nx - 1 } else { ih - 1 };
        let jm = if jh == 0 { ny - 1 } else { jh - 1 };
        let wbar = 0.5 * (w[grid.w_idx(im, jh)] + w[grid.w_idx(ih, jh)]);
        let ubar = 0.5 * (u[grid.u_idx(ih, jm)] + u[grid.u_idx(ih, jh)]);
        wbar * ubar
    };

    let cell_uu = |i: usize, j: usize| -> f64 {
        let a = 0.5 * (u[grid.u_idx(i, j)] + u[grid.u_idx(i + 1, j)]);
        a * a
    };
    let cell_ww = |i: usize, j: usize| -> f64 {
        let a = 0.5 * (w[grid.w_idx(i, j)] + w[grid.w_idx(i, j + 1)]);
        a * a
    };

    let u_active = grid.u_faces_active();
    hu.par_chunks_mut(nx + 1).enumerate().for_each(|(j, row)| {
        row.iter_mut().for_each(|v| *v = 0.0);
        for i in u_active.clone() {
            let il = grid.left(i).expect("active x-face has a left cell");
            let c = grid.cell(i, j);
            let cl = grid.cell(il, j);
            let adv = (cell_uu(i, j) - cell_uu(il, j)) / dx + (fc(i, j + 1) - fc(i, j)) / dy;
            let visc = (s.s11[c] - s.s11[cl]) / dx + (s.s12[grid.corner(i, j + 1)] - s.s12[grid.corner(i, j)]) / dy;
            row[i] = visc - adv;
        }
    });
    let w_active = grid.w_rows_active();
    hw.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        row.iter_mut().for_each(|v| *v = 0.0);
        if !w_active.contains(&j) {
            return;
        }
        let jl = grid.down(j).expect("active y-face has a lower cell");
        for (i, out) in row.iter_mut().enumerate() {
            let c = grid.cell(i, j);
            let cd = grid.cell(i, jl);
            let adv = (fc(i + 1, j) - fc(i, j)) / dx + (cell_ww(i, j) - cell_ww(i, jl)) / dy;
            let visc = (s.s12[grid.corner(i + 1, j)] - s.s12[grid.corner(i, j)]) / dx + (s.s22[c] - s.s22[cd]) / dy;
            *out = visc - adv;
        }
    });
}

/// Subtracts `dt grad q` on the active faces.
pub fn apply_pressure_gradient(grid: &SpatialGrid, q: &[f64], dt: f64, u: &mut [f64], w: &mut [f64]) {
    let (dx, dy) = (grid.dx, grid.dy);
    for j in 0..grid.ny {
        for i in grid.u_faces_active() {
            let il = grid.left(i).expect("active face");
            u[grid.u_idx(i, j)] -= dt * (q[grid.cell(i, j)] - q[grid.cell(il, j)]) / dx;
        }
    }
    for j in grid.w_rows_active() {
        let jl = grid.down(j).expect("active face");
        for i in 0..grid.nx {
            w[grid.w_idx(i, j)] -= dt * (q[grid.cell(i, j)] - q[grid.cell(i, jl)]) / dy;
        }
    }
    grid.sync_faces(u, w);
}

/// Makes `v` discretely divergence-free; returns the Poisson iteration count.
pub fn project(
    grid: &SpatialGrid,
    v: &mut Velocity,
    q: &mut [f64],
    dt: f64,
    poisson: &mut PoissonSolver,
    div_tol: f64,
) -> Result<usize> {
    grid.sync_faces(&mut v.u, &mut v.w);
    let div = grid.divergence(&v.u, &v.w);
    let b: Vec<f64> = div.iter().map(|d| d / dt).collect();
    let umax = v.max_abs().max(f64::MIN_POSITIVE);
    let target = div_tol * umax / (grid.min_spacing() * dt);
    let iters = poisson.solve(grid, q, &b, target)?;
    apply_pressure_gradient(grid, q, dt, &mut v.u, &mut v.w);
    Ok(iters)
}

/// `max |div v| h / max |v|`.
pub fn relative_divergence(grid: &SpatialGrid, v: &Velocity) -> f64 {
    let umax = v.max_abs();
    if umax == 0.0 {
        return 0.0;
    }
    let div = grid.divergence(&v.u, &v.w);
    div.iter().fold(0.0f64, |m, d| m.max(d.abs())) * grid.min_spacing() / umax
}

/// One projection step of the momentum equation with the viscosity frozen at
/// the given mean chain length field.
#[allow(clippy::too_many_arguments)]
pub fn step_fluid(
    grid: &SpatialGrid,
    coeffs: &ModelCoefficients,
    psi_tilde: &[f64],
    v: &mut Velocity,
    q: &mut [f64],
    hist: &mut FluidHistory,
    dt: f64,
    force: &BodyForce,
    poisson: &mut PoissonSolver,
    div_tol: f64,
) -> Result<FluidStepReport> {
    let s = compute_stress_field(grid, coeffs, psi_tilde, &v.u, &v.w)?;
    let max_nu = s.nu_cell.iter().chain(&s.nu_corner).fold(0.0f64, |m, &x| m.max(x));
    let mut hu = vec![0.0; grid.n_u()];
    let mut hw = vec![0.0; grid.n_w()];
    momentum_rhs(grid, &s, &v.u, &v.w, &mut hu, &mut hw);

    let (c_new, c_old) = match hist.dt {
        Some(dt_prev) if hist.hu.len() == hu.len() => {
            let r = dt / dt_prev;
            (1.0 + 0.5 * r, -0.5 * r)
        }
        _ => (1.0, 0.0),
    };
    let f = if force.is_zero() { None } else { Some(force.faces(grid)) };
    for k in 0..hu.len() {
        let old = if c_old != 0.0 { hist.hu[k] } else { 0.0 };
        v.u[k] += dt * (c_new * hu[k] + c_old * old);
        if let Some(f) = &f {
            v.u[k] += dt * f.u[k];
        }
    }
    for k in 0..hw.len() {
        let old = if c_old != 0.0 { hist.hw[k] } else { 0.0 };
        v.w[k] += dt * (c_new * hw[k] + c_old * old);
        if let Some(f) = &f {
            v.w[k] += dt * f.w[k];
        }
    }
    hist.hu = hu;
    hist.hw = hw;
    hist.dt = Some(dt);

    let iters = project(grid, v, q, dt, poisson, div_tol)?;
    Ok(FluidStepReport {
        poisson_iterations: iters,
        divergence: relative_divergence(grid, v),
        max_nu,
    })
}

use crate::error::Result;
use crate::grid::SpatialGrid;
use crate::model::ModelCoefficients;

use super::{compute_stress_field, BodyForce, Velocity};

/// Terms of the kinetic energy balance at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub kinetic: f64,
    /// `int S : D`
    pub dissipation: f64,
    /// `alpha* int_wall |v|^2`
    pub wall: f64,
    /// `int f . v`
    pub power: f64,
}

impl EnergyTerms {
    /// Rate at which kinetic energy leaves the flow.
    pub fn loss_rate(&self) -> f64 {
        self.dissipation + self.wall - self.power
    }
}

/// `1/2 sum v^2 dA` over the unique faces.
pub fn kinetic_energy(grid: &SpatialGrid, v: &Velocity) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let a = v.u[grid.u_idx(i, j)];
            let b = v.w[grid.w_idx(i, j)];
            s += a * a + b * b;
        }
    }
    0.5 * s * grid.cell_area()
}

pub fn energy_terms(
    grid: &SpatialGrid,
    coeffs: &ModelCoefficients,
    psi_tilde: &[f64],
    v: &Velocity,
    force: &BodyForce,
) -> Result<EnergyTerms> {
    let s = compute_stress_field(grid, coeffs, psi_tilde, &v.u, &v.w)?;
    let power = if force.is_zero() {
        0.0
    } else {
        let f = force.faces(grid);
        let mut p = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                p += f.u[grid.u_idx(i, j)] * v.u[grid.u_idx(i, j)] + f.w[grid.w_idx(i, j)] * v.w[grid.w_idx(i, j)];
            }
        }
        p * grid.cell_area()
    };
    Ok(EnergyTerms {
        kinetic: kinetic_energy(grid, v),
        dissipation: s.dissipation(grid),
        wall: s.wall_term,
        power,
    })
}

/// Cumulative residual of `KE(t) - KE(0) + int_0^t (dissipation + wall - power)`,
/// with trapezoidal time integration of the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    pub kinetic0: f64,
    pub last: EnergyTerms,
    pub integrated_loss: f64,
    pub residual: f64,
}

impl EnergyAudit {
    pub fn new(initial: EnergyTerms) -> Self {
        EnergyAudit {
            kinetic0: initial.kinetic,
            last: initial,
            integrated_loss: 0.0,
            residual: 0.0,
        }
    }

    pub fn record(&mut self, terms: EnergyTerms, dt: f64) -> f64 {
        self.integrated_loss += 0.5 * dt * (self.last.loss_rate() + terms.loss_rate());
        self.last = terms;
        self.residual = terms.kinetic - self.kinetic0 + self.integrated_loss;
        self.residual
    }
}

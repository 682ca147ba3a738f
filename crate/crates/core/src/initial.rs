//! Initial data: velocity from a discrete stream function (divergence-free
//! to roundoff by construction), smooth seeded perturbations for `phi` and
//! `psi`, and a compactly supported bump in `r`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::Velocity;
use crate::fragmentation::ChainGrid;
use crate::grid::{Boundary, SpatialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityInit {
    #[default]
    Rest,
    /// `u = A sin(kx x) cos(ky y)`, `w = -A (kx/ky) cos(kx x) sin(ky y)`
    TaylorGreen { amplitude: f64 },
    /// Seeded sum of the lowest `modes` stream-function modes per axis,
    /// scaled to `max |v| = amplitude`.
    Random { amplitude: f64, modes: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub velocity: VelocityInit,
    /// Mean monomer concentration.
    pub phi0: f64,
    /// Relative amplitude of the smooth random variation of `phi` in x, in `[0, 1)`.
    pub phi_perturbation: f64,
    /// Peak of the chain-length bump.
    pub psi_height: f64,
    /// Support of the bump in `r`.
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub psi_perturbation: f64,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            velocity: VelocityInit::TaylorGreen { amplitude: 1.0 },
            phi0: 1.0,
            phi_perturbation: 0.0,
            psi_height: 0.05,
            psi_lo: 2.0,
            psi_hi: 8.0,
            psi_perturbation: 0.0,
            seed: 0,
        }
    }
}

impl InitialConfig {
    pub fn check(&self, chain_r0: f64, r_inf: f64) -> Result<()> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !(self.phi0 >= 0.0) || !self.phi0.is_finite() {
            return Err(Error::constraint("phi0 >= 0", format!("phi0 = {}", self.phi0)));
        }
        if !(self.psi_height >= 0.0) || !self.psi_height.is_finite() {
            return Err(Error::constraint(
                "psi_height >= 0",
                format!("psi_height = {}", self.psi_height),
            ));
        }
        if !unit(self.phi_perturbation) || !unit(self.psi_perturbation) {
            return Err(Error::constraint(
                "perturbation amplitudes in [0, 1)",
                format!("phi {}, psi {}", self.phi_perturbation, self.psi_perturbation),
            ));
        }
        if !(chain_r0 <= self.psi_lo && self.psi_lo < self.psi_hi && self.psi_hi <= r_inf) {
            return Err(Error::constraint(
                "r0 <= psi_lo < psi_hi <= r_inf",
                format!("[{}, {}] inside [{chain_r0}, {r_inf}]", self.psi_lo, self.psi_hi),
            ));
        }
        match self.velocity {
            VelocityInit::Rest => {}
            VelocityInit::TaylorGreen { amplitude } | VelocityInit::Random { amplitude, .. } => {
                if !amplitude.is_finite() {
                    return Err(Error::constraint("finite velocity amplitude", amplitude.to_string()));
                }
            }
        }
        if let VelocityInit::Random { modes: 0, .. } = self.velocity {
            return Err(Error::constraint("random velocity modes >= 1", "modes = 0"));
        }
        Ok(())
    }
}

/// `(1 - s^2)^2` on the support, zero outside.
pub fn bump(r: f64, lo: f64, hi: f64) -> f64 {
    let s = (2.0 * r - lo - hi) / (hi - lo);
    if s.abs() < 1.0 {
        (1.0 - s * s).powi(2)
    } else {
        0.0
    }
}

/// Basis function along one axis: cosines on periodic axes, sines vanishing
/// at both ends on wall axes.
fn mode(b: Boundary, k: u32, phase: f64, x: f64, l: f64) -> f64 {
    match b {
        Boundary::Periodic => (2.0 * PI * k as f64 * x / l + phase).cos(),
        Boundary::SlipWall => (PI * k as f64 * x / l).sin(),
    }
}

/// Velocity from stream-function values at the corners: `u = d_y chi`,
/// `w = -d_x chi`. The discrete divergence vanishes identically and the
/// wall-normal velocity is zero when `chi` vanishes on walls.
pub fn velocity_from_stream(grid: &SpatialGrid, chi: impl Fn(f64, f64) -> f64) -> Velocity {
    let mut v = Velocity::zeros(grid);
    let c = |i: usize, j: usize| chi(i as f64 * grid.dx, j as f64 * grid.dy);
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            v.u[grid.u_idx(i, j)] = (c(i, j + 1) - c(i, j)) / grid.dy;
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            v.w[grid.w_idx(i, j)] = -(c(i + 1, j) - c(i, j)) / grid.dx;
        }
    }
    grid.sync_faces(&mut v.u, &mut v.w);
    v
}

pub fn initial_velocity(grid: &SpatialGrid, init: &VelocityInit, rng: &mut ChaCha8Rng) -> Velocity {
    match *init {
        VelocityInit::Rest => Velocity::zeros(grid),
        VelocityInit::TaylorGreen { amplitude } => {
            let (kx, ky) = (2.0 * PI / grid.lx, 2.0 * PI / grid.ly);
            velocity_from_stream(grid, |x, y| amplitude * (kx * x).sin() * (ky * y).sin() / ky)
        }
        VelocityInit::Random { amplitude, modes } => {
            let mut terms = Vec::new();
            for m in 1..=modes {
                for n in 1..=modes {
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    terms.push((
                        m,
                        n,
                        a / (m * m + n * n) as f64,
                        rng.gen_range(0.0..2.0 * PI),
                        rng.gen_range(0.0..2.0 * PI),
                    ));
                }
            }
            let mut v = velocity_from_stream(grid, |x, y| {
                terms
                    .iter()
                    .map(|&(m, n, a, px, py)| a * mode(grid.bx, m, px, x, grid.lx) * mode(grid.by, n, py, y, grid.ly))
                    .sum()
            });
            let vmax = v.max_abs();
            if vmax > 0.0 {
                let s = amplitude / vmax;
                v.u.iter_mut().chain(v.w.iter_mut()).for_each(|x| *x *= s);
            }
            v
        }
    }
}

/// Smooth seeded field at the cell centers with `max |f| = 1`, or zeros when
/// `amplitude == 0` (no random numbers are drawn then).
pub fn smooth_field(grid: &SpatialGrid, rng: &mut ChaCha8Rng, amplitude: f64) -> Vec<f64> {
    if amplitude == 0.0 {
        return vec![0.0; grid.n_cells()];
    }
    let mut terms = Vec::new();
    for m in 0..=3u32 {
        for n in 0..=3u32 {
            if m + n == 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            terms.push((
                m,
                n,
                a / (1 + m * m + n * n) as f64,
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            ));
        }
    }
    let mut f = vec![0.0; grid.n_cells()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.cell_center(i, j);
            f[grid.cell(i, j)] = terms
                .iter()
                .map(|&(m, n, a, px, py)| {
                    a * (2.0 * PI * m as f64 * x / grid.lx + px).cos() * (2.0 * PI * n as f64 * y / grid.ly + py).cos()
                })
                .sum();
        }
    }
    let m = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        f.iter_mut().for_each(|x| *x *= amplitude / m);
    }
    f
}

/// `(velocity, phi, psi)` at `t = 0`.
pub fn initial_fields(grid: &SpatialGrid, chain: &ChainGrid, init: &InitialConfig) -> (Velocity, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let v = initial_velocity(grid, &init.velocity, &mut rng);
    let fphi = smooth_field(grid, &mut rng, init.phi_perturbation);
    let fpsi = smooth_field(grid, &mut rng, init.psi_perturbation);
    let phi: Vec<f64> = fphi.iter().map(|f| init.phi0 * (1.0 + f)).collect();
    let profile = chain.project(|r| init.psi_height * bump(r, init.psi_lo, init.psi_hi));
    let nr = chain.len();
    let mut psi = vec![0.0; grid.n_cells() * nr];
    for (c, slice) in psi.chunks_mut(nr).enumerate() {
        for (p, &b) in slice.iter_mut().zip(&profile) {
            *p = b * (1.0 + fpsi[c]);
        }
    }
    (v, phi, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::relative_divergence;

    #[test]
    fn stream_velocity_is_divergence_free_with_walls() {
        for (bx, by) in [
            (Boundary::Periodic, Boundary::Periodic),
            (Boundary::Periodic, Boundary::SlipWall),
            (Boundary::SlipWall, Boundary::SlipWall),
        ] {
            let g = SpatialGrid::new(2.0 * PI, 2.0 * PI, 24, 20, bx, by).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let v = initial_velocity(
                &g,
                &VelocityInit::Random {
                    amplitude: 2.0,
                    modes: 3,
                },
                &mut rng,
            );
            assert!(relative_divergence(&g, &v) < 1e-13);
            assert!((v.max_abs() - 2.0).abs() < 1e-12);
            let tg = initial_velocity(&g, &VelocityInit::TaylorGreen { amplitude: 1.0 }, &mut rng);
            assert!(relative_divergence(&g, &tg) < 1e-13);
        }
    }

    #[test]
    fn fields_are_nonnegative_and_seeded() {
        let g = SpatialGrid::periodic(1.0, 8).unwrap();
        let chain = ChainGrid::uniform(1.0, 11.0, 40).unwrap();
        let init = InitialConfig {
            phi_perturbation: 0.9,
            psi_perturbation: 0.5,
            seed: 11,
            ..Default::default()
        };
        let (_, phi, psi) = initial_fields(&g, &chain, &init);
        assert!(phi.iter().all(|&p| p > 0.0));
        assert!(psi.iter().all(|&p| p >= 0.0));
        let (_, phi2, psi2) = initial_fields(&g, &chain, &init);
        assert_eq!(phi, phi2);
        assert_eq!(psi, psi2);
        let other = initial_fields(&g, &chain, &InitialConfig { seed: 12, ..init }).1;
        assert_ne!(phi, other);
    }

    #[test]
    fn bump_support() {
        assert_eq!(bump(2.0, 2.0, 8.0), 0.0);
        assert_eq!(bump(5.0, 2.0, 8.0), 1.0);
        assert_eq!(bump(9.0, 2.0, 8.0), 0.0);
    }
}

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Boundary, SpatialGrid};
use crate::model::{ModelCoefficients, SymTensor};

/// Strain rate, viscosity and stress on the staggered grid.
///
/// Normal components live at cell centers, shear components at corners.
/// Wall corners carry the Navier-slip closure: the tangential wall velocity
/// `u_w` solves `nu (u_0 - u_w) / h = alpha* u_w` over the half cell between
/// the wall and the first interior face.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub d11: Vec<f64>,
    pub d22: Vec<f64>,
    pub d12: Vec<f64>,
    pub nu_cell: Vec<f64>,
    pub nu_corner: Vec<f64>,
    pub s11: Vec<f64>,
    pub s22: Vec<f64>,
    pub s12: Vec<f64>,
    /// Quadrature weight of each corner in `sum S12 D12`: 1 inside, 1/2 on a
    /// wall, 0 at box corners and periodic duplicates.
    pub corner_weight: Vec<f64>,
    /// `alpha* sum u_w^2 ds` over the slip walls.
    pub wall_term: f64,
}

#[derive(Clone, Copy)]
struct CornerValue {
    d12: f64,
    nu: f64,
    weight: f64,
    wall: f64,
}

impl StressField {
    /// Strain tensor at cell `c` with the shear part averaged from its four corners.
    pub fn cell_strain(&self, grid: &SpatialGrid, i: usize, j: usize) -> SymTensor {
        let c = grid.cell(i, j);
        SymTensor::new(self.d11[c], corner_avg(grid, &self.d12, i, j), self.d22[c])
    }

    /// `sum_cells nu (D11^2 + D22^2) dA + sum_corners w_c 2 S12 D12 dA`.
    pub fn dissipation(&self, grid: &SpatialGrid) -> f64 {
        let da = grid.cell_area();
        let cells: f64 = self
            .s11
            .iter()
            .zip(&self.d11)
            .zip(self.s22.iter().zip(&self.d22))
            .map(|((s1, d1), (s2, d2))| s1 * d1 + s2 * d2)
            .sum();
        let corners: f64 = self
            .s12
            .iter()
            .zip(&self.d12)
            .zip(&self.corner_weight)
            .map(|((s, d), wt)| wt * 2.0 * s * d)
            .sum();
        (cells + corners) * da
    }

    /// `sum |D|^p dA` with the cell-centered strain.
    pub fn strain_p_norm(&self, grid: &SpatialGrid, p: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                s += self.cell_strain(grid, i, j).norm().powf(p);
            }
        }
        s * grid.cell_area()
    }
}

fn corner_avg(grid: &SpatialGrid, v: &[f64], i: usize, j: usize) -> f64 {
    0.25 * (v[grid.corner(i, j)] + v[grid.corner(i + 1, j)] + v[grid.corner(i, j + 1)] + v[grid.corner(i + 1, j + 1)])
}

/// Evaluates `S = nu(psi~, |D|) D` on the staggered grid.
pub fn compute_stress_field(
    grid: &SpatialGrid,
    coeffs: &ModelCoefficients,
    psi_tilde: &[f64],
    u: &[f64],
    w: &[f64],
) -> Result<StressField> {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx, grid.dy);
    let alpha = coeffs.alpha_star;

    let mut d11 = vec![0.0; grid.n_cells()];
    let mut d22 = vec![0.0; grid.n_cells()];
    d11.par_chunks_mut(nx)
        .zip(d22.par_chunks_mut(nx))
        .enumerate()
        .for_each(|(j, (r11, r22))| {
            for i in 0..nx {
                r11[i] = (u[grid.u_idx(i + 1, j)] - u[grid.u_idx(i, j)]) / dx;
                r22[i] = (w[grid.w_idx(i, j + 1)] - w[grid.w_idx(i, j)]) / dy;
            }
        });

    let x_wall = grid.bx == Boundary::SlipWall;
    let y_wall = grid.by == Boundary::SlipWall;

    let corner_value = |ci: usize| -> Result<CornerValue> {
        let (mut i, mut j) = (ci % (nx + 1), ci / (nx + 1));
        let mut weight = 1.0;
        if !x_wall && i == nx {
            i = 0;
            weight = 0.0;
        }
        if !y_wall && j == ny {
            j = 0;
            weight = 0.0;
        }
        let on_x = x_wall && (i == 0 || i == nx);
        let on_y = y_wall && (j == 0 || j == ny);
        if on_x && on_y {
            return Ok(CornerValue {
                d12: 0.0,
                nu: 0.0,
                weight: 0.0,
                wall: 0.0,
            });
        }
        // cells sharing this corner
        let xs = [grid.left(i), if i < nx { Some(i) } else { None }];
        let ys = [grid.down(j), if j < ny { Some(j) } else { None }];
        let (mut pt, mut a11, mut a22, mut cnt) = (0.0, 0.0, 0.0, 0.0);
        for cy in ys.iter().flatten() {
            for cx in xs.iter().flatten() {
                let c = grid.cell(*cx, *cy);
                pt += psi_tilde[c];
                a11 += d11[c];
                a22 += d22[c];
                cnt += 1.0;
            }
        }
        let (pt, a11, a22) = (pt / cnt, a11 / cnt, a22 / cnt);
        let normal_sq = a11 * a11 + a22 * a22;

        if on_y || on_x {
            // tangential velocity at the first interior face and orientation
            let (v0, h, sign, ds) = if on_y {
                if j == 0 {
                    (u[grid.u_idx(i, 0)], dy, 1.0, dx)
                } else {
                    (u[grid.u_idx(i, ny - 1)], dy, -1.0, dx)
                }
            } else if i == 0 {
                (w[grid.w_idx(0, j)], dx, 1.0, dy)
            } else {
                (w[grid.w_idx(nx - 1, j)], dx, -1.0, dy)
            };
            let mut d12 = 0.0;
            let mut nu = 0.0;
            let mut vw = v0;
            for _ in 0..3 {
                nu = coeffs.nu(pt, (normal_sq + 2.0 * d12 * d12).sqrt())?;
                vw = if alpha > 0.0 { nu * v0 / (nu + alpha * h) } else { v0 };
                d12 = sign * (v0 - vw) / h;
            }
            return Ok(CornerValue {
                d12,
                nu,
                weight: 0.5 * weight,
                // periodic duplicates (weight 0) are not counted twice
                wall: weight * alpha * vw * vw * ds,
            });
        }

        let jm = grid.down(j).expect("interior corner");
        let im = grid.left(i).expect("interior corner");
        let dudy = (u[grid.u_idx(i, j)] - u[grid.u_idx(i, jm)]) / dy;
        let dwdx = (w[grid.w_idx(i, j)] - w[grid.w_idx(im, j)]) / dx;
        let d12 = 0.5 * (dudy + dwdx);
        let nu = coeffs.nu(pt, (normal_sq + 2.0 * d12 * d12).sqrt())?;
        Ok(CornerValue {
            d12,
            nu,
            weight,
            wall: 0.0,
        })
    };

    let corners: Vec<CornerValue> = (0..grid.n_corners())
        .into_par_iter()
        .map(corner_value)
        .collect::<Result<_>>()?;

    let d12: Vec<f64> = corners.iter().map(|c| c.d12).collect();
    let nu_corner: Vec<f64> = corners.iter().map(|c| c.nu).collect();
    let corner_weight: Vec<f64> = corners.iter().map(|c| c.weight).collect();
    let wall_term: f64 = corners.iter().map(|c| c.wall).sum();
    let s12: Vec<f64> = d12.iter().zip(&nu_corner).map(|(d, n)| d * n).collect();

    let nu_cell: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % nx, c / nx);
            let sh = corner_avg(grid, &d12, i, j);
            let shear = (d11[c] * d11[c] + d22[c] * d22[c] + 2.0 * sh * sh).sqrt();
            coeffs.nu(psi_tilde[c], shear)
        })
        .collect::<Result<_>>()?;
    let s11 = d11.iter().zip(&nu_cell).map(|(d, n)| d * n).collect();
    let s22 = d22.iter().zip(&nu_cell).map(|(d, n)| d * n).collect();

    Ok(StressField {
        d11,
        d22,
        d12,
        nu_cell,
        nu_corner,
        s11,
        s22,
        s12,
        corner_weight,
        wall_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientParams;

    fn newtonian(nu: f64, alpha: f64) -> ModelCoefficients {
        ModelCoefficients::from_params(&CoefficientParams {
            p: 2.0,
            c_flory: 0.0,
            nu_ref: nu,
            nu_inf: 0.0,
            alpha_star: alpha,
            ..Default::default()
        })
        .unwrap()
    }

    fn fill(g: &SpatialGrid, fu: impl Fn(f64, f64) -> f64, fw: impl Fn(f64, f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; g.n_u()];
        let mut w = vec![0.0; g.n_w()];
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let (x, y) = g.u_pos(i, j);
                u[g.u_idx(i, j)] = fu(x, y);
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let (x, y) = g.w_pos(i, j);
                w[g.w_idx(i, j)] = fw(x, y);
            }
        }
        (u, w)
    }

    #[test]
    fn zero_velocity_gives_zero_stress() {
        let g = SpatialGrid::new(1.0, 1.0, 8, 8, Boundary::SlipWall, Boundary::SlipWall).unwrap();
        let c = ModelCoefficients::default();
        let s = compute_stress_field(&g, &c, &vec![1.0; 64], &vec![0.0; g.n_u()], &vec![0.0; g.n_w()]).unwrap();
        assert!(s.s11.iter().chain(&s.s22).chain(&s.s12).all(|&v| v == 0.0));
        assert_eq!(s.wall_term, 0.0);
    }

    #[test]
    fn rigid_rotation_is_stress_free_inside() {
        let g = SpatialGrid::new(2.0, 2.0, 16, 16, Boundary::SlipWall, Boundary::SlipWall).unwrap();
        let c = newtonian(0.1, 0.0);
        let (u, w) = fill(&g, |_, y| -(y - 1.0), |x, _| x - 1.0);
        let s = compute_stress_field(&g, &c, &vec![0.0; 256], &u, &w).unwrap();
        for j in 1..16 {
            for i in 1..16 {
                assert!(s.s12[g.corner(i, j)].abs() < 1e-14);
            }
        }
        assert!(s.s11.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn simple_shear_strain() {
        let g = SpatialGrid::periodic(1.0, 16).unwrap();
        // periodic shear u = sin(2 pi y) has D12 = pi cos(2 pi y) at corners
        let c = newtonian(0.1, 0.0);
        let k = 2.0 * std::f64::consts::PI;
        let (u, w) = fill(&g, |_, y| (k * y).sin(), |_, _| 0.0);
        let s = compute_stress_field(&g, &c, &vec![0.0; 256], &u, &w).unwrap();
        let h = g.dy;
        for j in 0..16 {
            let y = j as f64 * h;
            // centered difference of sin over one cell
            let exact = 0.5 * ((k * (y + 0.5 * h)).sin() - (k * (y - 0.5 * h)).sin()) / h;
            assert!((s.d12[g.corner(3, j)] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_shear_norm() {
        // u = g y on a channel: D = [[0, g/2], [g/2, 0]], |D| = g / sqrt 2
        let gamma = 0.8;
        let g = SpatialGrid::new(1.0, 1.0, 8, 8, Boundary::Periodic, Boundary::SlipWall).unwrap();
        let c = newtonian(0.1, 0.0);
        let (u, w) = fill(&g, |_, y| gamma * y, |_, _| 0.0);
        let s = compute_stress_field(&g, &c, &vec![0.0; 64], &u, &w).unwrap();
        let d = s.cell_strain(&g, 3, 4);
        assert!((d.norm() - gamma / 2f64.sqrt()).abs() < 1e-12);
        assert!((d.xy - gamma / 2.0).abs() < 1e-12);
    }

    #[test]
    fn navier_slip_balances_wall_stress() {
        let g = SpatialGrid::new(1.0, 1.0, 8, 8, Boundary::Periodic, Boundary::SlipWall).unwrap();
        let alpha = 0.7;
        let c = newtonian(0.05, alpha);
        let (u, w) = fill(&g, |_, y| 1.0 + y, |_, _| 0.0);
        let s = compute_stress_field(&g, &c, &vec![0.0; 64], &u, &w).unwrap();
        let u0 = u[g.u_idx(2, 0)];
        let uw = 0.05 * u0 / (0.05 + alpha * g.dy);
        assert!((s.s12[g.corner(2, 0)] - alpha * uw).abs() < 1e-14);
        let ut = u[g.u_idx(2, 7)];
        let uwt = 0.05 * ut / (0.05 + alpha * g.dy);
        assert!((s.s12[g.corner(2, 8)] + alpha * uwt).abs() < 1e-14);
    }
}

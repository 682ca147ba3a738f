//! Pressure Poisson equation with homogeneous Neumann data on walls,
//! solved by conjugate gradients on the mean-zero subspace.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// `(L q)_c = sum over existing neighbors (q_nb - q_c) / h^2`.
pub fn laplacian(grid: &SpatialGrid, q: &[f64], out: &mut [f64]) {
    let (nx, idx2, idy2) = (grid.nx, 1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, o) in row.iter_mut().enumerate() {
            let qc = q[grid.cell(i, j)];
            let mut acc = 0.0;
            if let Some(l) = grid.left(i) {
                acc += (q[grid.cell(l, j)] - qc) * idx2;
            }
            if let Some(r) = grid.right(i) {
                acc += (q[grid.cell(r, j)] - qc) * idx2;
            }
            if let Some(d) = grid.down(j) {
                acc += (q[grid.cell(i, d)] - qc) * idy2;
            }
            if let Some(u) = grid.up(j) {
                acc += (q[grid.cell(i, u)] - qc) * idy2;
            }
            *o = acc;
        }
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct PoissonSolver {
    pub max_iter: usize,
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(n: usize, max_iter: usize) -> Self {
        PoissonSolver {
            max_iter,
            r: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        }
    }

    /// Solves `L q = b` (after removing the mean of `b`), starting from the
    /// current `q`, until `max |b - L q| <= target`. Returns the iteration count.
    pub fn solve(&mut self, grid: &SpatialGrid, q: &mut [f64], b: &[f64], target: f64) -> Result<usize> {
        let n = q.len();
        if self.r.len() != n {
            *self = PoissonSolver::new(n, self.max_iter);
        }
        let mut rhs = b.to_vec();
        remove_mean(&mut rhs);
        remove_mean(q);
        // CG runs on the positive semidefinite -L q = -b, whose residual is L q - b
        laplacian(grid, q, &mut self.ap);
        for k in 0..n {
            self.r[k] = self.ap[k] - rhs[k];
        }
        remove_mean(&mut self.r);
        if max_abs(&self.r) <= target {
            return Ok(0);
        }
        self.p.copy_from_slice(&self.r);
        let mut rr = dot(&self.r, &self.r);
        for it in 1..=self.max_iter {
            laplacian(grid, &self.p, &mut self.ap);
            self.ap.iter_mut().for_each(|x| *x = -*x);
            let pap = dot(&self.p, &self.ap);
            if pap <= 0.0 {
                break;
            }
            let a = rr / pap;
            for k in 0..n {
                q[k] += a * self.p[k];
                self.r[k] -= a * self.ap[k];
            }
            if it % 50 == 0 {
                // refresh against drift of the recursive residual
                laplacian(grid, q, &mut self.ap);
                for k in 0..n {
                    self.r[k] = self.ap[k] - rhs[k];
                }
                remove_mean(&mut self.r);
            }
            if max_abs(&self.r) <= target {
                remove_mean(q);
                return Ok(it);
            }
            let rr_new = dot(&self.r, &self.r);
            let bta = rr_new / rr;
            rr = rr_new;
            for k in 0..n {
                self.p[k] = self.r[k] + bta * self.p[k];
            }
        }
        Err(Error::PoissonNoConvergence {
            iterations: self.max_iter,
            residual: max_abs(&self.r),
            target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn recovers_manufactured_solution() {
        for (bx, by) in [
            (Boundary::Periodic, Boundary::Periodic),
            (Boundary::SlipWall, Boundary::SlipWall),
            (Boundary::Periodic, Boundary::SlipWall),
        ] {
            let g = SpatialGrid::new(1.0, 2.0, 24, 32, bx, by).unwrap();
            let mut exact: Vec<f64> = (0..g.n_cells()).map(|c| ((c * 7919) % 101) as f64 / 101.0).collect();
            remove_mean(&mut exact);
            let mut b = vec![0.0; g.n_cells()];
            laplacian(&g, &exact, &mut b);
            let mut q = vec![0.0; g.n_cells()];
            let mut s = PoissonSolver::new(g.n_cells(), 5000);
            s.solve(&g, &mut q, &b, 1e-11).unwrap();
            let err = q.iter().zip(&exact).fold(0.0f64, |m, (a, e)| m.max((a - e).abs()));
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn reports_non_convergence() {
        let g = SpatialGrid::periodic(1.0, 32).unwrap();
        let b: Vec<f64> = (0..g.n_cells()).map(|c| (c as f64).sin()).collect();
        let mut q = vec![0.0; g.n_cells()];
        let mut s = PoissonSolver::new(g.n_cells(), 3);
        assert!(matches!(
            s.solve(&g, &mut q, &b, 1e-14),
            Err(Error::PoissonNoConvergence { .. })
        ));
    }
}

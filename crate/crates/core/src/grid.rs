//! Rectangular staggered (MAC) grid.
//!
//! Layout, with `i` along x and `j` along y:
//! - cells `(i, j)`, `0 <= i < nx`, `0 <= j < ny`, index `j * nx + i`;
//! - u on x-faces `(i, j)`, `0 <= i <= nx`, index `j * (nx + 1) + i`;
//!   face `i` sits at `x = i dx`, between cells `i - 1` and `i`;
//! - w on y-faces `(i, j)`, `0 <= j <= ny`, index `j * nx + i`;
//! - corners `(i, j)` at `(i dx, j dy)`, index `j * (nx + 1) + i`.
//!
//! On a periodic axis the last face/corner duplicates the first and is kept
//! in sync; on a wall axis the first and last faces carry zero normal velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    SlipWall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub bx: Boundary,
    pub by: Boundary,
}

impl SpatialGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, bx: Boundary, by: Boundary) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::invalid(format!(
                "domain lengths must be positive, got {lx} x {ly}"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 cells per axis, got {nx} x {ny}"
            )));
        }
        Ok(SpatialGrid {
            lx,
            ly,
            nx,
            ny,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            bx,
            by,
        })
    }

    pub fn periodic(l: f64, n: usize) -> Result<Self> {
        Self::new(l, l, n, n, Boundary::Periodic, Boundary::Periodic)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_u(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_w(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_corners(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn u_idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn w_idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn corner(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn u_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn w_pos(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, j as f64 * self.dy)
    }

    /// Cell index to the left, wrapping on a periodic axis.
    #[inline]
    pub fn left(&self, i: usize) -> Option<usize> {
        if i > 0 {
            Some(i - 1)
        } else if self.bx == Boundary::Periodic {
            Some(self.nx - 1)
        } else {
            None
        }
    }

    #[inline]
    pub fn right(&self, i: usize) -> Option<usize> {
        if i + 1 < self.nx {
            Some(i + 1)
        } else if self.bx == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    }

    #[inline]
    pub fn down(&self, j: usize) -> Option<usize> {
        if j > 0 {
            Some(j - 1)
        } else if self.by == Boundary::Periodic {
            Some(self.ny - 1)
        } else {
            None
        }
    }

    #[inline]
    pub fn up(&self, j: usize) -> Option<usize> {
        if j + 1 < self.ny {
            Some(j + 1)
        } else if self.by == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    }

    /// x-faces whose velocity is an unknown (excludes walls and the periodic
    /// duplicate).
    pub fn u_faces_active(&self) -> std::ops::Range<usize> {
        match self.bx {
            Boundary::Periodic => 0..self.nx,
            Boundary::SlipWall => 1..self.nx,
        }
    }

    pub fn w_rows_active(&self) -> std::ops::Range<usize> {
        match self.by {
            Boundary::Periodic => 0..self.ny,
            Boundary::SlipWall => 1..self.ny,
        }
    }

    /// Discrete divergence at every cell.
    pub fn divergence(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut div = vec![0.0; self.n_cells()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                div[self.cell(i, j)] = (u[self.u_idx(i + 1, j)] - u[self.u_idx(i, j)]) / self.dx
                    + (w[self.w_idx(i, j + 1)] - w[self.w_idx(i, j)]) / self.dy;
            }
        }
        div
    }

    /// Copies periodic duplicates and zeroes wall-normal faces.
    pub fn sync_faces(&self, u: &mut [f64], w: &mut [f64]) {
        for j in 0..self.ny {
            match self.bx {
                Boundary::Periodic => u[self.u_idx(self.nx, j)] = u[self.u_idx(0, j)],
                Boundary::SlipWall => {
                    u[self.u_idx(0, j)] = 0.0;
                    u[self.u_idx(self.nx, j)] = 0.0;
                }
            }
        }
        for i in 0..self.nx {
            match self.by {
                Boundary::Periodic => w[self.w_idx(i, self.ny)] = w[self.w_idx(i, 0)],
                Boundary::SlipWall => {
                    w[self.w_idx(i, 0)] = 0.0;
                    w[self.w_idx(i, self.ny)] = 0.0;
                }
            }
        }
    }

    /// Cell-centered velocity by face averaging.
    pub fn cell_velocity(&self, u: &[f64], w: &[f64], i: usize, j: usize) -> [f64; 2] {
        [
            0.5 * (u[self.u_idx(i, j)] + u[self.u_idx(i + 1, j)]),
            0.5 * (w[self.w_idx(i, j)] + w[self.w_idx(i, j + 1)]),
        ]
    }
}

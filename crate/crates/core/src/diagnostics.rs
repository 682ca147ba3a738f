//! Per-step invariant readouts and the run-level audits built on them.
//!
//! All reductions run sequentially in cell order so that records are
//! bit-for-bit reproducible regardless of the thread count.

use crate::fragmentation::ChainGrid;
use crate::grid::SpatialGrid;

/// Exponent of the high-order moment that the truncation rule watches.
pub const THETA1_STAR: f64 = 2.0;

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    /// `int phi + int int r psi`
    pub total_mass: f64,
    /// `(E(t) - E0) / E0`
    pub mass_drift: f64,
    /// First moment that left through `r_inf`, cumulative.
    pub outflow: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub wall: f64,
    pub power: f64,
    pub energy_residual: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub psi_tilde_min: f64,
    pub psi_tilde_mean: f64,
    pub psi_tilde_max: f64,
    /// `int int r^3 psi^2`
    pub weighted_l2: f64,
    /// `int_0^t int int r^3 A |grad psi|^2`, cumulative.
    pub weighted_grad: f64,
    /// `int_0^t int |grad phi|^2`, cumulative.
    pub grad_phi: f64,
    pub divergence: f64,
    pub poisson_iterations: u64,
    pub diffusion_substeps: u64,
    pub retries: u64,
    /// Fraction of `M_1` within 10% of `r_inf`.
    pub tail_fraction: f64,
}

impl DiagnosticsRecord {
    /// Column names, in the order of [`DiagnosticsRecord::values`].
    pub const COLUMNS: [&'static str; 31] = [
        "step",
        "t",
        "dt",
        "total_mass",
        "mass_drift",
        "outflow",
        "kinetic",
        "dissipation",
        "wall",
        "power",
        "energy_residual",
        "m0",
        "m1",
        "m2",
        "m3",
        "phi_min",
        "phi_max",
        "psi_min",
        "psi_max",
        "psi_tilde_min",
        "psi_tilde_mean",
        "psi_tilde_max",
        "weighted_l2",
        "weighted_grad",
        "grad_phi",
        "divergence",
        "poisson_iterations",
        "diffusion_substeps",
        "retries",
        "tail_fraction",
        "weighted_total",
    ];

    pub fn values(&self) -> [f64; 31] {
        [
            self.step as f64,
            self.t,
            self.dt,
            self.total_mass,
            self.mass_drift,
            self.outflow,
            self.kinetic,
            self.dissipation,
            self.wall,
            self.power,
            self.energy_residual,
            self.m0,
            self.m1,
            self.m2,
            self.m3,
            self.phi_min,
            self.phi_max,
            self.psi_min,
            self.psi_max,
            self.psi_tilde_min,
            self.psi_tilde_mean,
            self.psi_tilde_max,
            self.weighted_l2,
            self.weighted_grad,
            self.grad_phi,
            self.divergence,
            self.poisson_iterations as f64,
            self.diffusion_substeps as f64,
            self.retries as f64,
            self.tail_fraction,
            self.weighted_total(),
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != Self::COLUMNS.len() {
            return None;
        }
        Some(DiagnosticsRecord {
            step: v[0] as u64,
            t: v[1],
            dt: v[2],
            total_mass: v[3],
            mass_drift: v[4],
            outflow: v[5],
            kinetic: v[6],
            dissipation: v[7],
            wall: v[8],
            power: v[9],
            energy_residual: v[10],
            m0: v[11],
            m1: v[12],
            m2: v[13],
            m3: v[14],
            phi_min: v[15],
            phi_max: v[16],
            psi_min: v[17],
            psi_max: v[18],
            psi_tilde_min: v[19],
            psi_tilde_mean: v[20],
            psi_tilde_max: v[21],
            weighted_l2: v[22],
            weighted_grad: v[23],
            grad_phi: v[24],
            divergence: v[25],
            poisson_iterations: v[26] as u64,
            diffusion_substeps: v[27] as u64,
            retries: v[28] as u64,
            tail_fraction: v[29],
        })
    }

    /// Weighted norm plus its cumulative dissipation.
    pub fn weighted_total(&self) -> f64 {
        self.weighted_l2 + self.weighted_grad
    }
}

/// `E = sum_c dA (phi_c + sum_j r_j psi_cj dr_j)`, cell by cell.
pub fn total_mass(grid: &SpatialGrid, chain: &ChainGrid, phi: &[f64], psi: &[f64]) -> f64 {
    let nr = chain.len();
    let rw: Vec<f64> = chain.centers().iter().zip(chain.widths()).map(|(r, w)| r * w).collect();
    let mut e = 0.0;
    for (c, &p) in phi.iter().enumerate() {
        let slice = &psi[c * nr..(c + 1) * nr];
        e += p + slice.iter().zip(&rw).map(|(a, b)| a * b).sum::<f64>();
    }
    e * grid.cell_area()
}

/// The same quantity by a different path: x-integrate `psi` per chain cell
/// first, then take the exact first moment of the result.
pub fn total_mass_by_moment(grid: &SpatialGrid, chain: &ChainGrid, phi: &[f64], psi: &[f64]) -> f64 {
    let nr = chain.len();
    let mut column = vec![0.0; nr];
    for slice in psi.chunks(nr) {
        for (acc, &v) in column.iter_mut().zip(slice) {
            *acc += v;
        }
    }
    let da = grid.cell_area();
    let column: Vec<f64> = column.iter().map(|v| v * da).collect();
    let phi_total: f64 = phi.iter().sum::<f64>() * da;
    phi_total + crate::fragmentation::moment(chain, &column, 1.0)
}

/// `int_Omega M_alpha(x) dx` with exact cell integrals of `r^alpha`.
pub fn domain_moment(grid: &SpatialGrid, chain: &ChainGrid, psi: &[f64], weights: &[f64]) -> f64 {
    let nr = chain.len();
    let mut s = 0.0;
    for slice in psi.chunks(nr) {
        s += slice.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
    }
    s * grid.cell_area()
}

/// `int int r^3 psi^2` (midpoint in r).
pub fn weighted_l2(grid: &SpatialGrid, chain: &ChainGrid, psi: &[f64]) -> f64 {
    let nr = chain.len();
    let wt: Vec<f64> = chain
        .centers()
        .iter()
        .zip(chain.widths())
        .map(|(r, w)| r * r * r * w)
        .collect();
    let mut s = 0.0;
    for slice in psi.chunks(nr) {
        s += slice.iter().zip(&wt).map(|(p, b)| p * p * b).sum::<f64>();
    }
    s * grid.cell_area()
}

/// `int int r^3 A(r) |grad_x psi|^2` over interior faces.
pub fn weighted_gradient(grid: &SpatialGrid, chain: &ChainGrid, diffusion: &[f64], psi: &[f64]) -> f64 {
    let nr = chain.len();
    let wt: Vec<f64> = chain
        .centers()
        .iter()
        .zip(chain.widths())
        .zip(diffusion)
        .map(|((r, w), a)| r * r * r * w * a)
        .collect();
    let (idx2, idy2) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
    let mut s = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.cell(i, j);
            let here = &psi[c * nr..(c + 1) * nr];
            for (nb, f) in [
                (grid.right(i).map(|r| grid.cell(r, j)), idx2),
                (grid.up(j).map(|u| grid.cell(i, u)), idy2),
            ] {
                if let Some(nb) = nb {
                    let there = &psi[nb * nr..(nb + 1) * nr];
                    for k in 0..nr {
                        let d = there[k] - here[k];
                        s += f * d * d * wt[k];
                    }
                }
            }
        }
    }
    s * grid.cell_area()
}

/// `(min, mean, max)`.
pub fn stats(v: &[f64]) -> (f64, f64, f64) {
    let (mut lo, mut hi, mut s) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
        s += x;
    }
    (lo, s / v.len().max(1) as f64, hi)
}

/// Gronwall constant of the alpha-moment bound:
/// `C(alpha, K) = K (max(1, alpha) + max(0, (1 - alpha)/(1 + alpha)))`.
pub fn moment_constant(alpha: f64, k: f64) -> f64 {
    k * (alpha.max(1.0) + ((1.0 - alpha) / (1.0 + alpha)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentAudit {
    /// Least-squares slope of `log M_alpha(t)`.
    pub rate: f64,
    /// `C(alpha, K) (1 + max phi)`.
    pub bound_rate: f64,
    /// Largest `log(M(t)/M(0)) / t` over the samples.
    pub worst_rate: f64,
    pub exceeded: bool,
}

/// Fits the exponential growth rate of a moment series and compares it (and
/// every sample) against `M(0) exp(C_ledger t)`.
pub fn moment_growth_audit(times: &[f64], values: &[f64], alpha: f64, k: f64, phi_max: f64) -> Option<MomentAudit> {
    if times.len() != values.len() || times.len() < 10 {
        return None;
    }
    let bound_rate = moment_constant(alpha, k) * (1.0 + phi_max);
    if values.iter().all(|&v| v == 0.0) {
        return Some(MomentAudit {
            rate: 0.0,
            bound_rate,
            worst_rate: 0.0,
            exceeded: false,
        });
    }
    let logs: Vec<f64> = values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = times.len() as f64;
    let (mt, ml) = (times.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut worst = f64::NEG_INFINITY;
    let mut exceeded = false;
    for (&t, &l) in times.iter().zip(&logs).skip(1) {
        let dt = t - times[0];
        if dt > 0.0 {
            let r = (l - logs[0]) / dt;
            worst = worst.max(r);
            if l - logs[0] > bound_rate * dt * (1.0 + 1e-12) + 1e-12 {
                exceeded = true;
            }
        }
    }
    Some(MomentAudit {
        rate,
        bound_rate,
        worst_rate: worst.max(0.0),
        exceeded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedAudit {
    pub initial: f64,
    /// `max_t (weighted_l2 + weighted_grad) / initial`.
    pub max_ratio: f64,
    pub exceeded: bool,
}

/// Checks `int int r^3 psi^2 + int int int r^3 A |grad psi|^2 <= bound * initial`.
pub fn weighted_l2_audit(series: &[DiagnosticsRecord], bound: Option<f64>) -> Option<WeightedAudit> {
    let first = series.first()?;
    let initial = first.weighted_total();
    let max_ratio = if initial > 0.0 {
        series.iter().map(|r| r.weighted_total() / initial).fold(0.0, f64::max)
    } else {
        0.0
    };
    Some(WeightedAudit {
        initial,
        max_ratio,
        exceeded: bound.is_some_and(|b| max_ratio > b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_monomer_mass() {
        let g = SpatialGrid::new(
            1.0,
            1.0,
            4,
            4,
            crate::grid::Boundary::Periodic,
            crate::grid::Boundary::SlipWall,
        )
        .unwrap();
        let chain = ChainGrid::uniform(1.0, 11.0, 10).unwrap();
        let phi = vec![1.0; 16];
        let psi = vec![0.0; 160];
        assert!((total_mass(&g, &chain, &phi, &psi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_matches_moment() {
        let g = SpatialGrid::periodic(2.0, 4).unwrap();
        let chain = ChainGrid::uniform(1.0, 11.0, 10).unwrap();
        let mut psi = vec![0.0; 160];
        let (c, j) = (5, 6);
        let a = g.cell_area();
        psi[c * 10 + j] = 1.0 / (a * chain.widths()[j]);
        let phi = vec![0.0; 16];
        let e = total_mass(&g, &chain, &phi, &psi);
        assert!((e - chain.centers()[j]).abs() < 1e-13);
        assert!((total_mass_by_moment(&g, &chain, &phi, &psi) - e).abs() < 1e-13 * e);
    }

    #[test]
    fn frozen_series_has_zero_rate() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let m = vec![3.0; 20];
        let a = moment_growth_audit(&t, &m, 1.0, 10.0, 1.0).unwrap();
        assert_eq!(a.rate, 0.0);
        assert!(!a.exceeded);
        let z = moment_growth_audit(&t, &[0.0; 20], 1.0, 10.0, 1.0).unwrap();
        assert_eq!(z.rate, 0.0);
    }

    #[test]
    fn detects_growth_above_bound() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let m: Vec<f64> = t.iter().map(|t| (50.0 * t).exp()).collect();
        let a = moment_growth_audit(&t, &m, 1.0, 10.0, 1.0).unwrap();
        assert!((a.rate - 50.0).abs() < 1e-9);
        assert!(a.exceeded);
    }

    #[test]
    fn uniform_psi_has_no_gradient() {
        let g = SpatialGrid::periodic(1.0, 4).unwrap();
        let chain = ChainGrid::uniform(1.0, 3.0, 5).unwrap();
        let psi: Vec<f64> = (0..80).map(|k| (k % 5) as f64).collect();
        assert_eq!(weighted_gradient(&g, &chain, &[0.1; 5], &psi), 0.0);
    }

    #[test]
    fn record_round_trips_through_values() {
        let r = DiagnosticsRecord {
            step: 7,
            t: 0.5,
            m1: 2.0,
            weighted_l2: 1.5,
            weighted_grad: 0.25,
            ..Default::default()
        };
        let back = DiagnosticsRecord::from_values(&r.values()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.values()[30], 1.75);
    }
}

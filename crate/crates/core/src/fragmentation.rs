//! Chain-length grid, the uniform fragmentation kernel, and the r-space
//! integral operators that feed the polymer and monomer equations.
//!
//! `psi` is stored as cell averages on `(r0, r_inf)`. Every operator here acts
//! on one spatial cell's slice and is O(N_r).

use crate::error::{Error, Result};

/// Finite-volume partition of the truncated chain-length interval `(r0, r_inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGrid {
    r0: f64,
    r_inf: f64,
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl ChainGrid {
    pub fn uniform(r0: f64, r_inf: f64, n: usize) -> Result<Self> {
        check_bounds(r0, r_inf, n)?;
        let h = (r_inf - r0) / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|j| r0 + h * j as f64).collect();
        edges[n] = r_inf;
        Self::from_edges(edges)
    }

    /// Cell widths grow geometrically so that the last cell is `stretch`
    /// times wider than the first.
    pub fn geometric(r0: f64, r_inf: f64, n: usize, stretch: f64) -> Result<Self> {
        check_bounds(r0, r_inf, n)?;
        if !(stretch > 0.0) || !stretch.is_finite() {
            return Err(Error::invalid(format!("stretch = {stretch} must be positive")));
        }
        if n == 1 || stretch == 1.0 {
            return Self::uniform(r0, r_inf, n);
        }
        let q = stretch.powf(1.0 / (n - 1) as f64);
        let first = (r_inf - r0) * (q - 1.0) / (q.powi(n as i32) - 1.0);
        let mut edges = Vec::with_capacity(n + 1);
        let mut e = r0;
        let mut w = first;
        edges.push(e);
        for _ in 0..n {
            e += w;
            w *= q;
            edges.push(e);
        }
        edges[n] = r_inf;
        Self::from_edges(edges)
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("chain grid needs at least one cell"));
        }
        if edges[0] <= 0.0 {
            return Err(Error::constraint("r0 > 0", format!("r0 = {}", edges[0])));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid(
                "chain grid edges must be finite and strictly increasing",
            ));
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(ChainGrid {
            r0: edges[0],
            r_inf: *edges.last().unwrap(),
            edges,
            centers,
            widths,
        })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Cell widths; these are also the midpoint quadrature weights.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell averages of `f`, by 3-point Gauss rule per cell.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| gauss_legendre_panels(w[0], w[1], 1, &f) / (w[1] - w[0]))
            .collect()
    }

    /// Exact cell integrals of `r^alpha`, so that `sum_j psi_j w_j` is the
    /// alpha-moment of the piecewise-constant `psi`.
    pub fn power_weights(&self, alpha: f64) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| power_integral(w[0], w[1], alpha))
            .collect()
    }
}

fn check_bounds(r0: f64, r_inf: f64, n: usize) -> Result<()> {
    if !(r0 > 0.0) {
        return Err(Error::constraint("r0 > 0", format!("r0 = {r0}")));
    }
    if !(r_inf > r0) || !r_inf.is_finite() {
        return Err(Error::invalid(format!("r_inf = {r_inf} must exceed r0 = {r0}")));
    }
    if n == 0 {
        return Err(Error::invalid("chain grid needs at least one cell"));
    }
    Ok(())
}

/// `int_a^b r^alpha dr`.
pub fn power_integral(a: f64, b: f64, alpha: f64) -> f64 {
    if alpha == -1.0 {
        (b / a).ln()
    } else if alpha == 0.0 {
        b - a
    } else if alpha == 1.0 {
        // (b - a)(b + a)/2 keeps the midpoint identity exact in floating point
        (b - a) * (0.5 * (a + b))
    } else {
        let e = alpha + 1.0;
        (b.powf(e) - a.powf(e)) / e
    }
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Composite 5-point Gauss-Legendre rule on `panels` equal panels of `[a, b]`.
pub fn gauss_legendre_panels(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        let mut s = 0.0;
        for (x, w) in GL5_NODES.iter().zip(&GL5_WEIGHTS) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// `int_0^inf r^(alpha-1) kappa(r, r~) dr = r~^(alpha-1) / alpha` for the
/// uniform kernel.
pub fn kernel_moment(alpha: f64, r_tilde: f64, r0: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must be positive")));
    }
    if !(r_tilde > r0) {
        return Err(Error::invalid(format!("r~ = {r_tilde} must exceed r0 = {r0}")));
    }
    Ok(r_tilde.powf(alpha - 1.0) / alpha)
}

/// Fragmentation rate per cell, `-beta psi + 2 int_r^{r_inf} beta psi / r~ dr~`,
/// written into `out`. The gain integral is a suffix sum of
/// `g_k = beta_k psi_k / r_k` (half of the own cell is included).
pub fn frag_apply(grid: &ChainGrid, psi: &[f64], beta: &[f64], out: &mut [f64]) {
    let (r, w) = (grid.centers(), grid.widths());
    let mut suffix = 0.0;
    for j in (0..psi.len()).rev() {
        let g = beta[j] * psi[j] / r[j] * w[j];
        out[j] = -beta[j] * psi[j] + 2.0 * (suffix + 0.5 * g);
        suffix += g;
    }
}

/// Monomers released by fragments shorter than `r0`:
/// `r0^2 int beta(r~) psi(r~) / r~ dr~`.
pub fn monomer_gain(grid: &ChainGrid, psi: &[f64], beta: &[f64]) -> f64 {
    let r0 = grid.r0();
    let s: f64 = psi
        .iter()
        .zip(beta)
        .zip(grid.centers().iter().zip(grid.widths()))
        .map(|((&p, &b), (&r, &w))| b * p / r * w)
        .sum();
    r0 * r0 * s
}

/// `int d_r(r tau) psi dr` with `d_r(r tau)` sampled at the cell centers.
pub fn polymer_sink_coefficient(grid: &ChainGrid, psi: &[f64], d_r_tau: &dyn Fn(f64) -> f64) -> f64 {
    psi.iter()
        .zip(grid.centers().iter().zip(grid.widths()))
        .map(|(&p, (&r, &w))| d_r_tau(r) * p * w)
        .sum()
}

/// `M_alpha = int r^alpha psi dr`, exact for piecewise-constant `psi`.
pub fn moment(grid: &ChainGrid, psi: &[f64], alpha: f64) -> f64 {
    psi.iter()
        .zip(grid.edges().windows(2))
        .map(|(&p, e)| p * power_integral(e[0], e[1], alpha))
        .sum()
}

/// One fragmentation step of length `dt` with the loss integrated exactly.
///
/// Each cell loses `L_j = psi_j (1 - exp(-beta_j dt))`; the lost chains are
/// redistributed with the uniform kernel, the part below `r0` is returned as
/// released monomers. Gains are nonnegative and the result stays nonnegative
/// for any `dt`.
pub fn frag_step(grid: &ChainGrid, psi: &mut [f64], beta: &[f64], dt: f64) -> f64 {
    let (r, w) = (grid.centers(), grid.widths());
    let r0 = grid.r0();
    let mut suffix = 0.0;
    for j in (0..psi.len()).rev() {
        let lost = -psi[j] * (-beta[j] * dt).exp_m1();
        let g = lost / r[j] * w[j];
        psi[j] = (psi[j] - lost) + 2.0 * (suffix + 0.5 * g);
        suffix += g;
    }
    r0 * r0 * suffix
}

/// Fraction of `M_alpha` carried by `[r_inf / 2, r_inf]`.
pub fn upper_half_fraction(grid: &ChainGrid, psi: &[f64], alpha: f64) -> f64 {
    partial_fraction(grid, psi, alpha, 0.5 * grid.r_inf())
}

/// Fraction of the chain mass `M_1` within 10% of `r_inf`.
pub fn near_cutoff_fraction(grid: &ChainGrid, psi: &[f64]) -> f64 {
    partial_fraction(grid, psi, 1.0, 0.9 * grid.r_inf())
}

fn partial_fraction(grid: &ChainGrid, psi: &[f64], alpha: f64, from: f64) -> f64 {
    let total = moment(grid, psi, alpha);
    if total <= 0.0 {
        return 0.0;
    }
    let part: f64 = psi
        .iter()
        .zip(grid.edges().windows(2))
        .filter(|(_, e)| e[1] > from)
        .map(|(&p, e)| p * power_integral(e[0].max(from), e[1], alpha))
        .sum();
    part / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle_frag(grid: &ChainGrid, psi: &[f64], beta: &[f64]) -> Vec<f64> {
        // O(N^2) quadrature of 2 int_r beta kappa psi, midpoint rule with the
        // own cell split in half
        let (r, w) = (grid.centers(), grid.widths());
        (0..psi.len())
            .map(|j| {
                let mut gain = 0.0;
                for k in 0..psi.len() {
                    let kap = if k > j {
                        1.0 / r[k]
                    } else if k == j {
                        0.5 / r[k]
                    } else {
                        0.0
                    };
                    gain += 2.0 * beta[k] * kap * psi[k] * w[k];
                }
                gain - beta[j] * psi[j]
            })
            .collect()
    }

    #[test]
    fn uniform_grid_partitions_interval() {
        let g = ChainGrid::uniform(1.0, 21.0, 256).unwrap();
        let s: f64 = g.widths().iter().sum();
        assert!((s - 20.0).abs() < 1e-12);
        assert_eq!(g.edges()[256], 21.0);
    }

    #[test]
    fn geometric_grid_partitions_interval() {
        let g = ChainGrid::geometric(1.0, 101.0, 200, 20.0).unwrap();
        let s: f64 = g.widths().iter().sum();
        assert!((s - 100.0).abs() < 1e-10);
        let ratio = g.widths()[199] / g.widths()[0];
        assert!((ratio - 20.0).abs() < 1e-8);
        assert!(g.widths().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ChainGrid::uniform(0.0, 1.0, 4).is_err());
        assert!(ChainGrid::uniform(2.0, 1.0, 4).is_err());
        assert!(ChainGrid::uniform(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn kernel_moment_closed_forms() {
        assert_eq!(kernel_moment(1.0, 3.7, 1.0).unwrap(), 1.0);
        assert_eq!(kernel_moment(2.0, 4.0, 1.0).unwrap(), 2.0);
        assert!((kernel_moment(3.0, 2.0, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(kernel_moment(2.0, 1.0, 1.0).is_err());
        assert!(kernel_moment(0.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn frag_of_zero_is_zero() {
        let g = ChainGrid::uniform(1.0, 11.0, 64).unwrap();
        let mut out = vec![1.0; 64];
        frag_apply(&g, &vec![0.0; 64], &vec![0.4; 64], &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
        assert_eq!(monomer_gain(&g, &vec![0.0; 64], &vec![0.4; 64]), 0.0);
    }

    #[test]
    fn single_cell_mass() {
        let g = ChainGrid::uniform(1.0, 11.0, 100).unwrap();
        let jhat = 60;
        let rhat = g.centers()[jhat];
        let mut psi = vec![0.0; 100];
        psi[jhat] = 1.0 / g.widths()[jhat];
        let beta0 = 0.4;
        let beta = vec![beta0; 100];
        let mut out = vec![0.0; 100];
        frag_apply(&g, &psi, &beta, &mut out);
        let oracle = oracle_frag(&g, &psi, &beta);
        for j in 0..100 {
            assert!((out[j] - oracle[j]).abs() <= 1e-13 * oracle[j].abs().max(1.0));
            if j < jhat {
                assert!((out[j] - 2.0 * beta0 / rhat).abs() < 1e-13);
            } else if j > jhat {
                assert_eq!(out[j], 0.0);
            }
        }
        let mg = monomer_gain(&g, &psi, &beta);
        assert!((mg - beta0 / rhat).abs() < 1e-14);
    }

    #[test]
    fn moment_of_box() {
        let g = ChainGrid::uniform(1.0, 11.0, 100).unwrap();
        let (h, a, b) = (0.7, 2.0, 6.0);
        let psi: Vec<f64> = g
            .centers()
            .iter()
            .map(|&r| if r > a && r < b { h } else { 0.0 })
            .collect();
        assert!((moment(&g, &psi, 1.0) - h * (b * b - a * a) / 2.0).abs() < 1e-12);
        assert!((moment(&g, &vec![1.0; 100], 0.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_and_power_moment_agree_at_first_order() {
        let g = ChainGrid::geometric(1.0, 31.0, 300, 8.0).unwrap();
        let psi = g.project(|r| (-(r - 6.0).powi(2)).exp());
        let mid: f64 = psi
            .iter()
            .zip(g.centers())
            .zip(g.widths())
            .map(|((p, r), w)| p * r * w)
            .sum();
        assert!((mid - moment(&g, &psi, 1.0)).abs() < 1e-13 * mid);
    }

    #[test]
    fn frag_step_conserves_to_quadrature_order() {
        let g = ChainGrid::uniform(1.0, 21.0, 512).unwrap();
        let mut psi = g.project(|r| (-(r - 8.0).powi(2)).exp());
        let beta: Vec<f64> = g.centers().iter().map(|&r| 0.4 * r / (1.0 + r)).collect();
        let m_before = moment(&g, &psi, 1.0);
        let released = frag_step(&g, &mut psi, &beta, 0.1);
        let m_after = moment(&g, &psi, 1.0);
        let rel = (m_after + released - m_before).abs() / m_before;
        let h = g.widths()[0];
        assert!(rel < h * h, "{rel}");
        assert!(psi.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn sink_coefficient_bounds() {
        let c = crate::model::ModelCoefficients::default();
        let g = ChainGrid::uniform(1.0, 21.0, 128).unwrap();
        let psi = g.project(|r| if r < 5.0 { 1.0 } else { 0.0 });
        let s = polymer_sink_coefficient(&g, &psi, &|r| c.d_r_tau(r));
        let m0 = moment(&g, &psi, 0.0);
        assert!(s >= m0 * c.r0 / c.k_const && s <= c.k_const * m0);
    }

    #[test]
    fn tail_fractions() {
        let g = ChainGrid::uniform(1.0, 21.0, 200).unwrap();
        let psi = g.project(|r| if r < 4.0 { 1.0 } else { 0.0 });
        assert_eq!(upper_half_fraction(&g, &psi, 2.0), 0.0);
        let flat = vec![1.0; 200];
        let f = near_cutoff_fraction(&g, &flat);
        let exact = (21.0f64.powi(2) - 18.9f64.powi(2)) / (21.0f64.powi(2) - 1.0);
        assert!((f - exact).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn suffix_sum_matches_double_loop(
            psi in prop::collection::vec(0.0f64..10.0, 1..80),
            b in 0.01f64..2.0,
        ) {
            let n = psi.len();
            let g = ChainGrid::geometric(1.0, 30.0, n, 5.0).unwrap();
            let beta: Vec<f64> = g.centers().iter().map(|&r| b * r / (1.0 + r)).collect();
            let mut out = vec![0.0; n];
            frag_apply(&g, &psi, &beta, &mut out);
            let oracle = oracle_frag(&g, &psi, &beta);
            let scale = oracle.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for j in 0..n {
                prop_assert!((out[j] - oracle[j]).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn gain_nonnegative(psi in prop::collection::vec(0.0f64..10.0, 1..80)) {
            let n = psi.len();
            let g = ChainGrid::uniform(1.0, 30.0, n).unwrap();
            let beta = vec![0.3; n];
            let mut out = vec![0.0; n];
            frag_apply(&g, &psi, &beta, &mut out);
            for j in 0..n {
                prop_assert!(out[j] + beta[j] * psi[j] >= 0.0);
            }
        }

        #[test]
        fn frag_step_positive(psi in prop::collection::vec(0.0f64..10.0, 1..80), dt in 0.0f64..100.0) {
            let n = psi.len();
            let g = ChainGrid::uniform(1.0, 30.0, n).unwrap();
            let beta = vec![0.4; n];
            let mut p = psi.clone();
            let rel = frag_step(&g, &mut p, &beta, dt);
            prop_assert!(rel >= 0.0);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
        }
    }
}

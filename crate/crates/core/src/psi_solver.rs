//! Chain-length distribution `psi(t, x, r)`: transport in r by polymerization,
//! fragmentation, and the x-transport sub-steps.
//!
//! The r-advection discretizes the non-conservative `tau(r) phi d_r psi` as an
//! upwind flux difference plus a cell correction chosen so that the discrete
//! first moment changes by exactly `phi sum_j d_r(r tau)(r_j) psi_j dr_j`, the
//! same quadrature the monomer sink uses. Polymerization therefore moves mass
//! between the two species without creating or destroying any, apart from what
//! leaves through `r_inf`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fragmentation::{frag_step, ChainGrid};
use crate::grid::SpatialGrid;
use crate::model::{ModelCoefficients, SymTensor};
use crate::transport::{advect, diffuse, AdvectionScheme};

/// Precomputed coefficients of the r-advection operator
/// `R(psi)_j = (tau_{j-1/2} psi_{j-1} - tau_{j+1/2} psi_j) / dr_j + c_j psi_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RAdvection {
    /// `tau` on the edges; the inflow edge at `r0` is never used.
    pub tau_edge: Vec<f64>,
    pub correction: Vec<f64>,
    /// `d_r(r tau)` at the centers: the sink weights.
    pub sink: Vec<f64>,
    inv_width: Vec<f64>,
    /// Outflow edge value times the virtual center beyond `r_inf`.
    outflow_r: f64,
}

impl RAdvection {
    pub fn new(grid: &ChainGrid, tau: &dyn Fn(f64) -> f64, d_r_tau: &dyn Fn(f64) -> f64) -> Self {
        let (r, w, e) = (grid.centers(), grid.widths(), grid.edges());
        let n = grid.len();
        let tau_edge: Vec<f64> = e.iter().map(|&x| tau(x)).collect();
        let sink: Vec<f64> = r.iter().map(|&x| d_r_tau(x)).collect();
        let virtual_r = r[n - 1] + w[n - 1];
        let correction = (0..n)
            .map(|j| {
                let next = if j + 1 < n { r[j + 1] } else { virtual_r };
                (sink[j] - tau_edge[j + 1] * (next - r[j]) / w[j]) / r[j]
            })
            .collect();
        RAdvection {
            tau_edge,
            correction,
            sink,
            inv_width: w.iter().map(|x| 1.0 / x).collect(),
            outflow_r: virtual_r,
        }
    }

    /// Operator for the full model with the coefficient family's `tau`.
    pub fn for_model(grid: &ChainGrid, c: &ModelCoefficients) -> Self {
        let tau = c.tau.clone();
        let dtau = c.tau_prime.clone();
        Self::new(grid, &|r| tau(r), &|r| tau(r) + r * dtau(r))
    }

    /// Operator with constant rate (the spatially homogeneous model).
    pub fn constant(grid: &ChainGrid, tau: f64) -> Self {
        Self::new(grid, &|_| tau, &|_| tau)
    }

    pub fn len(&self) -> usize {
        self.correction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correction.is_empty()
    }

    /// `R(psi)` into `out`.
    pub fn apply(&self, psi: &[f64], out: &mut [f64]) {
        let n = psi.len();
        for j in 0..n {
            let inflow = if j > 0 { self.tau_edge[j] * psi[j - 1] } else { 0.0 };
            out[j] = (inflow - self.tau_edge[j + 1] * psi[j]) * self.inv_width[j] + self.correction[j] * psi[j];
        }
    }

    /// Worst diagonal loss rate `tau_{j+1/2}/dr_j - min(c_j, 0)`; `dt phi` times
    /// this must stay below one for positivity.
    pub fn max_rate(&self) -> f64 {
        (0..self.len())
            .map(|j| self.tau_edge[j + 1] * self.inv_width[j] - self.correction[j].min(0.0))
            .fold(0.0, f64::max)
    }

    /// Diagonal loss rate of chain cell `j`.
    pub fn loss_rate(&self, j: usize) -> f64 {
        self.tau_edge[j + 1] * self.inv_width[j] - self.correction[j]
    }

    /// `sum_j d_r(r tau)(r_j) psi_j dr_j`.
    pub fn sink_coefficient(&self, psi: &[f64], widths: &[f64]) -> f64 {
        psi.iter()
            .zip(&self.sink)
            .zip(widths)
            .map(|((p, s), w)| p * s * w)
            .sum()
    }

    /// First-moment flux through `r_inf` per unit `phi`.
    pub fn outflow_moment(&self, psi: &[f64]) -> f64 {
        let n = psi.len();
        self.tau_edge[n] * psi[n - 1] * self.outflow_r
    }

    /// One explicit step `psi += dt phi R(psi)`, in the nonnegative form.
    pub fn step(&self, psi: &mut [f64], speed: f64) {
        let n = psi.len();
        let mut prev = 0.0;
        for j in 0..n {
            let own = psi[j];
            let inflow = if j > 0 {
                speed * self.tau_edge[j] * self.inv_width[j] * prev
            } else {
                0.0
            };
            psi[j] = own * (1.0 - speed * self.loss_rate(j)) + inflow;
            prev = own;
        }
    }
}

/// Fragmentation rates `beta(r_j, v, D)` of one spatial cell.
pub fn beta_slice(c: &ModelCoefficients, grid: &ChainGrid, v: [f64; 2], d: &SymTensor, out: &mut [f64]) {
    for (o, &r) in out.iter_mut().zip(grid.centers()) {
        *o = (c.beta)(r, v, d);
    }
}

/// Most negative entry and its location.
pub fn min_value(psi: &[f64]) -> (f64, usize) {
    psi.iter().enumerate().fold(
        (f64::INFINITY, 0),
        |(m, k), (i, &x)| if x < m { (x, i) } else { (m, k) },
    )
}

pub fn check_nonnegative(name: &'static str, data: &[f64], tol: f64) -> Result<()> {
    let (m, k) = min_value(data);
    if m < -tol || m.is_nan() {
        return Err(Error::InvariantBreach {
            invariant: name,
            detail: format!("value {m:e} at index {k}"),
        });
    }
    Ok(())
}

/// x-advection then x-diffusion of every r-slice. Returns the diffusion
/// sub-step count.
#[allow(clippy::too_many_arguments)]
pub fn transport_psi(
    grid: &SpatialGrid,
    scheme: AdvectionScheme,
    u: &[f64],
    w: &[f64],
    dt: f64,
    diffusion: &[f64],
    psi: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<usize> {
    let nr = diffusion.len();
    scratch.resize(psi.len(), 0.0);
    advect(scheme, grid, u, w, dt, nr, psi, scratch)?;
    std::mem::swap(psi, scratch);
    Ok(diffuse(grid, diffusion, dt, nr, psi, scratch))
}

/// Inputs of the sequential (operator-split) psi step.
pub struct PsiStepInputs<'a> {
    pub chain: &'a ChainGrid,
    pub radv: &'a RAdvection,
    /// `A(r_j)` per chain cell.
    pub diffusion: &'a [f64],
    pub phi: &'a [f64],
    /// `beta` per spatial cell and chain cell, same layout as `psi`.
    pub beta: &'a [f64],
    pub scheme: AdvectionScheme,
}

/// Sequential sub-steps: x-advection, r-advection with the given `phi`,
/// x-diffusion, fragmentation with exact exponential loss. Returns the
/// released monomers per spatial cell and the diffusion sub-step count.
pub fn step_psi(
    grid: &SpatialGrid,
    inp: &PsiStepInputs<'_>,
    u: &[f64],
    w: &[f64],
    dt: f64,
    psi: &mut Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let nr = inp.chain.len();
    check_nonnegative("psi-minimum-principle", psi, 1e-14)?;
    let phi_max = inp.phi.iter().fold(0.0f64, |m, &x| m.max(x));
    let rate = dt * phi_max * inp.radv.max_rate();
    if rate > 1.0 {
        return Err(Error::Cfl {
            limit: "r-advective",
            dt,
            required: dt / rate,
        });
    }
    let mut scratch = vec![0.0; psi.len()];
    advect(inp.scheme, grid, u, w, dt, nr, psi, &mut scratch)?;
    std::mem::swap(psi, &mut scratch);
    psi.par_chunks_mut(nr).enumerate().for_each(|(c, slice)| {
        inp.radv.step(slice, dt * inp.phi[c]);
    });
    let subs = diffuse(grid, inp.diffusion, dt, nr, psi, &mut scratch);
    let released: Vec<f64> = psi
        .par_chunks_mut(nr)
        .zip(inp.beta.par_chunks(nr))
        .map(|(slice, beta)| frag_step(inp.chain, slice, beta, dt))
        .collect();
    check_nonnegative("psi-minimum-principle", psi, 0.0)?;
    Ok((released, subs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragmentation::moment;
    use crate::model::CoefficientParams;
    use proptest::prelude::*;

    fn chain() -> ChainGrid {
        ChainGrid::uniform(1.0, 21.0, 200).unwrap()
    }

    #[test]
    fn first_moment_balance_is_exact() {
        let g = chain();
        let c = ModelCoefficients::default();
        let op = RAdvection::for_model(&g, &c);
        let psi = g.project(|r| (-(r - 6.0f64).powi(2)).exp() + 0.01);
        let mut rate = vec![0.0; g.len()];
        op.apply(&psi, &mut rate);
        let dm1: f64 = rate
            .iter()
            .zip(g.centers())
            .zip(g.widths())
            .map(|((d, r), w)| d * r * w)
            .sum();
        let expect = op.sink_coefficient(&psi, g.widths()) - op.outflow_moment(&psi);
        assert!((dm1 - expect).abs() < 1e-13 * expect.abs(), "{dm1} {expect}");
    }

    #[test]
    fn constant_rate_has_no_correction_on_uniform_grid() {
        let g = chain();
        let op = RAdvection::constant(&g, 1.3);
        assert!(op.correction.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn number_balance_matches_tau_prime() {
        // d/dt M0 = phi int tau' psi for the non-conservative transport
        let g = ChainGrid::uniform(1.0, 21.0, 2000).unwrap();
        let c = ModelCoefficients::default();
        let op = RAdvection::for_model(&g, &c);
        let psi = g.project(|r| (-(r - 6.0f64).powi(2)).exp());
        let mut rate = vec![0.0; g.len()];
        op.apply(&psi, &mut rate);
        let dm0: f64 = rate.iter().zip(g.widths()).map(|(d, w)| d * w).sum();
        let exact: f64 = psi
            .iter()
            .zip(g.centers())
            .zip(g.widths())
            .map(|((p, &r), w)| p * (c.tau_prime)(r) * w)
            .sum();
        assert!((dm0 - exact).abs() < 1e-2 * exact, "{dm0} {exact}");
    }

    #[test]
    fn frozen_generators_leave_psi_unchanged() {
        let sg = SpatialGrid::periodic(1.0, 4).unwrap();
        let g = ChainGrid::uniform(1.0, 11.0, 20).unwrap();
        let c = ModelCoefficients::from_params(&CoefficientParams::default()).unwrap();
        let radv = RAdvection::for_model(&g, &c);
        let psi0: Vec<f64> = (0..16 * 20).map(|k| (k % 7) as f64).collect();
        let mut psi = psi0.clone();
        let zeros = vec![0.0; 16 * 20];
        let inp = PsiStepInputs {
            chain: &g,
            radv: &radv,
            diffusion: &[0.0; 20],
            phi: &[0.0; 16],
            beta: &zeros,
            scheme: AdvectionScheme::Upwind,
        };
        let (rel, _) = step_psi(&sg, &inp, &vec![0.0; sg.n_u()], &vec![0.0; sg.n_w()], 0.1, &mut psi).unwrap();
        assert_eq!(psi, psi0);
        assert!(rel.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn number_conserved_without_fragmentation_up_to_boundary_flux() {
        // tau constant: the operator is conservative in M0 with zero inflow at r0
        let g = ChainGrid::uniform(1.0, 41.0, 400).unwrap();
        let op = RAdvection::constant(&g, 1.0);
        let mut psi = g.project(|r| if (3.0..6.0).contains(&r) { 1.0 } else { 0.0 });
        let m0 = moment(&g, &psi, 0.0);
        let mut out_flux = 0.0;
        for _ in 0..100 {
            out_flux += 0.05 * op.tau_edge[g.len()] * psi[g.len() - 1];
            op.step(&mut psi, 0.05);
        }
        assert!((moment(&g, &psi, 0.0) + out_flux - m0).abs() < 1e-13 * m0);
    }

    proptest! {
        #[test]
        fn r_step_positive(psi in prop::collection::vec(0.0f64..3.0, 200), frac in 0.0f64..1.0) {
            let g = chain();
            let op = RAdvection::for_model(&g, &ModelCoefficients::default());
            let mut p = psi.clone();
            op.step(&mut p, frac / op.max_rate());
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}

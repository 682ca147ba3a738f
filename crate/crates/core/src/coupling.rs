//! One coupled time step and the run loop.
//!
//! Default order per step: `psi~` from the current `psi`, fluid step (stress
//! lagged at that `psi~`), x-transport of both species with the new velocity,
//! then the polymerization/fragmentation exchange solved cell by cell with the
//! new `phi` in both equations. The exchange moves first-moment mass between
//! `phi` and `psi` without loss, so the global mass changes only through the
//! fragmentation quadrature and the cutoff at `r_inf`.
//!
//! `SplittingOrder::Sequential` runs the literal fluid, psi (old phi), phi
//! (new psi) sequence instead.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, MomentAudit, WeightedAudit, THETA1_STAR};
use crate::error::{Error, Result};
use crate::fluid::{
    compute_stress_field, energy_terms, relative_divergence, step_fluid, BodyForce, EnergyAudit, FluidHistory,
    PoissonSolver, Velocity,
};
use crate::fragmentation::{frag_step, near_cutoff_fraction, upper_half_fraction, ChainGrid};
use crate::grid::{Boundary, SpatialGrid};
use crate::initial::{bump, initial_fields, InitialConfig};
use crate::io::snapshot::Snapshot;
use crate::io::timeseries::SeriesWriter;
use crate::model::{weighted_average_with, CoefficientParams, ModelCoefficients};
use crate::phi_solver::{step_phi, transport_phi, truncate};
use crate::psi_solver::{beta_slice, check_nonnegative, step_psi, transport_psi, PsiStepInputs, RAdvection};
use crate::transport::{gradient_energy, AdvectionScheme};
use crate::zero_dim::ZeroDimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingOrder {
    /// Transport, then the polymer/monomer exchange with the new `phi`.
    #[default]
    Coupled,
    /// Fluid, psi with the old `phi`, phi with the new `psi`.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bx: Boundary,
    pub by: Boundary,
    pub nr: usize,
    pub r_inf: f64,
    /// Ratio of the last to the first chain cell width; 1 is uniform.
    pub r_stretch: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 32,
            ny: 32,
            lx: 2.0 * std::f64::consts::PI,
            ly: 2.0 * std::f64::consts::PI,
            bx: Boundary::Periodic,
            by: Boundary::SlipWall,
            nr: 256,
            r_inf: 21.0,
            r_stretch: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dt_max: f64,
    /// `dt max|v| / h`
    pub cfl_adv: f64,
    /// `dt phi max_j(tau_{j+1/2} / dr_j)`
    pub cfl_r: f64,
    /// `dt max(A, A0, nu (p - 1)) / h^2`
    pub cfl_diff: f64,
    pub splitting: SplittingOrder,
    pub scheme: AdvectionScheme,
    pub max_retries: usize,
    /// Level `k` of the truncation `T_k(phi)` in the exchange terms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_truncation: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_final: 1.0,
            dt_max: 0.05,
            cfl_adv: 0.25,
            cfl_r: 0.5,
            cfl_diff: 0.2,
            splitting: SplittingOrder::Coupled,
            scheme: AdvectionScheme::Upwind,
            max_retries: 5,
            phi_truncation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Time-series row every this many steps (the last step is always written).
    pub series_every: u64,
    /// Snapshot every this many steps; 0 writes only the initial and final state.
    pub snapshot_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            series_every: 1,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative drift of the total mass over the run.
    pub mass: f64,
    /// Relative slack of the monomer maximum principle.
    pub max_principle: f64,
    /// `max |div v| h / max |v|` after projection.
    pub divergence: f64,
    /// Bound on the weighted norm plus its dissipation, relative to its initial value.
    pub weighted_growth: f64,
    /// Fraction of the first moment near `r_inf` that triggers the tail warning.
    pub tail: f64,
    pub poisson_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mass: 1e-4,
            max_principle: 1e-8,
            divergence: 1e-10,
            weighted_growth: 10.0,
            tail: 1e-6,
            poisson_max_iter: 20_000,
        }
    }
}

/// Everything a run needs. Serialized as the TOML configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub coefficients: CoefficientParams,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub output: OutputConfig,
    pub tolerances: Tolerances,
    pub forcing: BodyForce,
    pub zero_dim: ZeroDimConfig,
}

/// Largest admissible fraction of the initial `M_2` beyond `r_inf / 2`.
pub const INITIAL_TAIL: f64 = 1e-8;

impl RunConfig {
    /// Structural checks beyond what parsing enforces. Violations name the
    /// rule they break.
    pub fn check(&self) -> Result<()> {
        self.coefficients.check()?;
        let g = &self.grid;
        if g.nx < 2 || g.ny < 2 {
            return Err(Error::constraint("nx, ny >= 2", format!("{} x {}", g.nx, g.ny)));
        }
        if g.nr < 2 {
            return Err(Error::constraint("nr >= 2", g.nr.to_string()));
        }
        if !(g.lx > 0.0 && g.ly > 0.0 && g.lx.is_finite() && g.ly.is_finite()) {
            return Err(Error::constraint("lx, ly > 0", format!("{} x {}", g.lx, g.ly)));
        }
        if !(g.r_inf > self.coefficients.r0) {
            return Err(Error::constraint("r_inf > r0", format!("r_inf = {}", g.r_inf)));
        }
        if !(g.r_stretch > 0.0) {
            return Err(Error::constraint("r_stretch > 0", g.r_stretch.to_string()));
        }
        let t = &self.time;
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return Err(Error::constraint("t_final >= 0", t.t_final.to_string()));
        }
        if !(t.dt_max > 0.0) {
            return Err(Error::constraint("dt_max > 0", t.dt_max.to_string()));
        }
        let adv_limit = match t.scheme {
            AdvectionScheme::Upwind => 1.0,
            AdvectionScheme::Minmod => 0.5,
        };
        if !(t.cfl_adv > 0.0 && t.cfl_adv <= adv_limit) {
            return Err(Error::constraint(
                "0 < cfl_adv <= scheme limit",
                format!("{} (limit {adv_limit})", t.cfl_adv),
            ));
        }
        if !(t.cfl_r > 0.0 && t.cfl_r < 1.0) {
            return Err(Error::constraint("0 < cfl_r < 1", t.cfl_r.to_string()));
        }
        if !(t.cfl_diff > 0.0 && t.cfl_diff <= 0.25) {
            return Err(Error::constraint("0 < cfl_diff <= 1/4", t.cfl_diff.to_string()));
        }
        if let Some(k) = t.phi_truncation {
            if !(k > 0.0) {
                return Err(Error::constraint("phi_truncation > 0", k.to_string()));
            }
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("tolerances.mass > 0", tol.mass),
            ("tolerances.max_principle > 0", tol.max_principle),
            ("tolerances.divergence > 0", tol.divergence),
            ("tolerances.weighted_growth > 0", tol.weighted_growth),
            ("tolerances.tail > 0", tol.tail),
        ] {
            if !(v > 0.0) {
                return Err(Error::constraint(name, v.to_string()));
            }
        }
        if tol.poisson_max_iter == 0 {
            return Err(Error::constraint("tolerances.poisson_max_iter > 0", "0"));
        }
        if self.output.series_every == 0 {
            return Err(Error::constraint("output.series_every > 0", "0"));
        }
        self.initial.check(self.coefficients.r0, g.r_inf)?;
        let init = &self.initial;
        let profile = self.chain_grid()?.project(|r| bump(r, init.psi_lo, init.psi_hi));
        let upper = upper_half_fraction(&self.chain_grid()?, &profile, THETA1_STAR);
        if upper >= INITIAL_TAIL {
            return Err(Error::constraint(
                "initial psi negligible above r_inf / 2",
                format!("fraction of M_{THETA1_STAR} beyond {} is {upper:e}", 0.5 * g.r_inf),
            ));
        }
        self.zero_dim.check(self.coefficients.r0)?;
        Ok(())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        let g = &self.grid;
        SpatialGrid::new(g.lx, g.ly, g.nx, g.ny, g.bx, g.by)
    }

    pub fn chain_grid(&self) -> Result<ChainGrid> {
        let g = &self.grid;
        if g.r_stretch == 1.0 {
            ChainGrid::uniform(self.coefficients.r0, g.r_inf, g.nr)
        } else {
            ChainGrid::geometric(self.coefficients.r0, g.r_inf, g.nr, g.r_stretch)
        }
    }
}

/// Running integrals carried with the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accumulators {
    /// First moment that left through `r_inf`.
    pub outflow: f64,
    /// `int_0^t int int r^3 A |grad psi|^2`
    pub weighted_grad: f64,
    /// `int_0^t int |grad phi|^2`
    pub grad_phi: f64,
}

/// The full unknown at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub velocity: Velocity,
    /// Projection pressure (kinematic, up to a constant).
    pub q: Vec<f64>,
    pub phi: Vec<f64>,
    /// `[cell][chain cell]`
    pub psi: Vec<f64>,
    pub psi_tilde: Vec<f64>,
    pub history: FluidHistory,
    pub totals: Accumulators,
    /// Largest viscosity seen by the last stress evaluation.
    pub nu_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct StepInfo {
    poisson_iterations: usize,
    divergence: f64,
    substeps: usize,
}

/// Solver state plus everything precomputed from the configuration.
pub struct Simulation {
    pub config: RunConfig,
    pub grid: SpatialGrid,
    pub chain: ChainGrid,
    pub coeffs: ModelCoefficients,
    pub radv: RAdvection,
    pub state: SimState,
    /// `A(r_j)`
    diffusion: Vec<f64>,
    /// `gamma(r_j) dr_j`
    gamma_weights: Vec<f64>,
    /// Exact cell integrals of `r^alpha` for `alpha = 0, 1, THETA1_STAR, 3`.
    moment_weights: [Vec<f64>; 4],
    poisson: PoissonSolver,
    energy: EnergyAudit,
    mass0: f64,
    phi_bound: f64,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.check()?;
        let coeffs = ModelCoefficients::from_params(&config.coefficients)?;
        let (v, phi, psi) = {
            let grid = config.spatial_grid()?;
            let chain = config.chain_grid()?;
            initial_fields(&grid, &chain, &config.initial)
        };
        Self::from_fields(config, coeffs, v, phi, psi)
    }

    /// Starts from explicit fields instead of the configured initial data.
    pub fn from_fields(
        config: RunConfig,
        coeffs: ModelCoefficients,
        velocity: Velocity,
        phi: Vec<f64>,
        psi: Vec<f64>,
    ) -> Result<Self> {
        config.check()?;
        let grid = config.spatial_grid()?;
        let chain = config.chain_grid()?;
        let nr = chain.len();
        if velocity.u.len() != grid.n_u() || velocity.w.len() != grid.n_w() {
            return Err(Error::invalid("velocity does not match the grid"));
        }
        if phi.len() != grid.n_cells() || psi.len() != grid.n_cells() * nr {
            return Err(Error::invalid("phi/psi do not match the grid"));
        }
        if phi.iter().chain(&psi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial phi/psi".into()));
        }
        check_nonnegative("psi-minimum-principle", &psi, 0.0)?;
        check_nonnegative("phi-minimum-principle", &phi, 0.0)?;
        let radv = RAdvection::for_model(&chain, &coeffs);
        let diffusion: Vec<f64> = chain.centers().iter().map(|&r| (coeffs.diffusion)(r)).collect();
        let gamma_weights: Vec<f64> = chain
            .centers()
            .iter()
            .zip(chain.widths())
            .map(|(&r, w)| (coeffs.gamma)(r) * w)
            .collect();
        let moment_weights = [0.0, 1.0, THETA1_STAR, 3.0].map(|a| chain.power_weights(a));
        let phi0_max = phi.iter().fold(0.0f64, |m, &x| m.max(x));
        let phi_bound = coeffs.phi_ceiling().max(phi0_max);
        let mut state = SimState {
            t: 0.0,
            step: 0,
            q: vec![0.0; grid.n_cells()],
            psi_tilde: vec![0.0; grid.n_cells()],
            velocity,
            phi,
            psi,
            history: FluidHistory::default(),
            totals: Accumulators::default(),
            nu_max: 0.0,
        };
        update_psi_tilde(&mut state, nr, &gamma_weights);
        let stress = compute_stress_field(&grid, &coeffs, &state.psi_tilde, &state.velocity.u, &state.velocity.w)?;
        state.nu_max = stress
            .nu_cell
            .iter()
            .chain(&stress.nu_corner)
            .fold(0.0f64, |m, &x| m.max(x));
        let e0 = energy_terms(&grid, &coeffs, &state.psi_tilde, &state.velocity, &config.forcing)?;
        let mass0 = diagnostics::total_mass(&grid, &chain, &state.phi, &state.psi);
        let poisson = PoissonSolver::new(grid.n_cells(), config.tolerances.poisson_max_iter);
        Ok(Simulation {
            config,
            grid,
            chain,
            coeffs,
            radv,
            state,
            diffusion,
            gamma_weights,
            moment_weights,
            poisson,
            energy: EnergyAudit::new(e0),
            mass0,
            phi_bound,
        })
    }

    /// `max(K^2, max phi0)`.
    pub fn phi_bound(&self) -> f64 {
        self.phi_bound
    }

    pub fn initial_mass(&self) -> f64 {
        self.mass0
    }

    /// Largest step allowed by the advective, r-advective and diffusive
    /// limits at the current state, capped by `dt_max`.
    pub fn stable_dt(&self, dt_max: f64) -> f64 {
        let t = &self.config.time;
        let s = &self.state;
        let h = self.grid.min_spacing();
        let mut dt = dt_max;
        let vmax = s.velocity.max_abs();
        if vmax > 0.0 {
            dt = dt.min(t.cfl_adv * h / vmax);
        }
        let phi_max = s.phi.iter().fold(0.0f64, |m, &x| m.max(x));
        let rate = phi_max * self.radv.max_rate();
        if rate > 0.0 {
            dt = dt.min(t.cfl_r / rate);
        }
        let visc = s.nu_max * (self.coeffs.p - 1.0).max(1.0);
        let d = self.diffusion.iter().fold(self.coeffs.a0, |m, &x| m.max(x)).max(visc);
        if d > 0.0 {
            dt = dt.min(t.cfl_diff * h * h / d);
        }
        dt
    }

    /// Advances by one accepted step of at most `dt_max`. Rejected attempts
    /// (CFL, invariant breach, Poisson failure) are retried with half the
    /// step, up to `max_retries` times.
    pub fn advance(&mut self, dt_max: f64) -> Result<DiagnosticsRecord> {
        let mut dt = self.stable_dt(dt_max);
        let mut retries = 0;
        loop {
            let mut trial = self.state.clone();
            match self.try_step(&mut trial, dt) {
                Ok(info) => {
                    self.state = trial;
                    let terms = energy_terms(
                        &self.grid,
                        &self.coeffs,
                        &self.state.psi_tilde,
                        &self.state.velocity,
                        &self.config.forcing,
                    )?;
                    self.energy.record(terms, dt);
                    let mut rec = self.diagnostics();
                    rec.dt = dt;
                    rec.poisson_iterations = info.poisson_iterations as u64;
                    rec.divergence = info.divergence;
                    rec.diffusion_substeps = info.substeps as u64;
                    rec.retries = retries as u64;
                    return Ok(rec);
                }
                Err(e @ (Error::Cfl { .. } | Error::InvariantBreach { .. } | Error::PoissonNoConvergence { .. })) => {
                    if retries >= self.config.time.max_retries {
                        return Err(Error::Aborted {
                            t: self.state.t,
                            retries,
                            source: Box::new(e),
                        });
                    }
                    log::warn!("t = {}: step dt = {dt:e} rejected ({e}); halving", self.state.t);
                    retries += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn try_step(&mut self, s: &mut SimState, dt: f64) -> Result<StepInfo> {
        let nr = self.chain.len();
        let grid = &self.grid;
        update_psi_tilde(s, nr, &self.gamma_weights);
        let rep = step_fluid(
            grid,
            &self.coeffs,
            &s.psi_tilde,
            &mut s.velocity,
            &mut s.q,
            &mut s.history,
            dt,
            &self.config.forcing,
            &mut self.poisson,
            // aim below the accepted level so roundoff does not trigger retries
            0.1 * self.config.tolerances.divergence,
        )?;
        if rep.divergence > self.config.tolerances.divergence {
            return Err(Error::InvariantBreach {
                invariant: "divergence-free",
                detail: format!("relative divergence {:e}", rep.divergence),
            });
        }
        let stress = compute_stress_field(grid, &self.coeffs, &s.psi_tilde, &s.velocity.u, &s.velocity.w)?;
        s.nu_max = stress
            .nu_cell
            .iter()
            .chain(&stress.nu_corner)
            .fold(0.0f64, |m, &x| m.max(x));

        let mut beta = vec![0.0; s.psi.len()];
        beta.par_chunks_mut(nr).enumerate().for_each(|(c, out)| {
            let (i, j) = (c % grid.nx, c / grid.nx);
            let v = grid.cell_velocity(&s.velocity.u, &s.velocity.w, i, j);
            let d = stress.cell_strain(grid, i, j);
            beta_slice(&self.coeffs, &self.chain, v, &d, out);
        });

        let scheme = self.config.time.scheme;
        let (u, w) = (&s.velocity.u, &s.velocity.w);
        let (substeps, outflow) = match self.config.time.splitting {
            SplittingOrder::Coupled => {
                let mut scratch = Vec::new();
                let a = transport_psi(grid, scheme, u, w, dt, &self.diffusion, &mut s.psi, &mut scratch)?;
                let b = transport_phi(grid, scheme, u, w, dt, self.coeffs.a0, &mut s.phi, &mut scratch)?;
                let outflow = self.exchange(s, &beta, dt)?;
                (a.max(b), outflow)
            }
            SplittingOrder::Sequential => {
                // outflow is estimated from the pre-step state on this path
                let outflow: f64 = s
                    .psi
                    .chunks(nr)
                    .zip(&s.phi)
                    .map(|(p, &f)| dt * f * self.radv.outflow_moment(p))
                    .sum::<f64>()
                    * grid.cell_area();
                let phi_old = s.phi.clone();
                let inp = PsiStepInputs {
                    chain: &self.chain,
                    radv: &self.radv,
                    diffusion: &self.diffusion,
                    phi: &phi_old,
                    beta: &beta,
                    scheme,
                };
                let (_, a) = step_psi(grid, &inp, u, w, dt, &mut s.psi)?;
                let b = step_phi(
                    grid,
                    &self.chain,
                    &self.radv,
                    scheme,
                    u,
                    w,
                    dt,
                    self.coeffs.a0,
                    &s.psi,
                    &beta,
                    &mut s.phi,
                )?;
                (a.max(b), outflow)
            }
        };

        check_nonnegative("psi-minimum-principle", &s.psi, 0.0)?;
        check_nonnegative("phi-minimum-principle", &s.phi, 0.0)?;
        let ceiling = self.phi_bound * (1.0 + self.config.tolerances.max_principle);
        if let Some((c, &p)) = s.phi.iter().enumerate().find(|(_, &p)| p > ceiling) {
            return Err(Error::InvariantBreach {
                invariant: "phi-max-principle",
                detail: format!("phi = {p:e} > {ceiling:e} in cell {c}"),
            });
        }

        s.totals.outflow += outflow;
        s.totals.weighted_grad += dt * diagnostics::weighted_gradient(grid, &self.chain, &self.diffusion, &s.psi);
        s.totals.grad_phi += dt * gradient_energy(grid, &s.phi);
        s.t += dt;
        s.step += 1;
        update_psi_tilde(s, nr, &self.gamma_weights);
        Ok(StepInfo {
            poisson_iterations: rep.poisson_iterations,
            divergence: rep.divergence,
            substeps,
        })
    }

    /// Polymerization and fragmentation in every cell with the monomer
    /// concentration taken at the end of the step:
    /// `phi' = (phi* + R) / (1 + dt s)`, `psi' = F(psi*) + dt T_k(phi') R(psi*)`,
    /// where `F` is the exact-loss fragmentation step releasing `R` and `s` is
    /// the polymer sink coefficient of `psi*`. Returns the first moment lost
    /// through `r_inf`.
    fn exchange(&self, s: &mut SimState, beta: &[f64], dt: f64) -> Result<f64> {
        let nr = self.chain.len();
        let k = self.config.time.phi_truncation;
        let radv = &self.radv;
        let chain = &self.chain;
        let results: Vec<Result<f64>> = s
            .psi
            .par_chunks_mut(nr)
            .zip(s.phi.par_iter_mut())
            .zip(beta.par_chunks(nr))
            .enumerate()
            .map(|(c, ((psi, phi), beta))| {
                let before = psi.to_vec();
                let sink = radv.sink_coefficient(&before, chain.widths());
                if sink < 0.0 {
                    return Err(Error::InvariantBreach {
                        invariant: "polymer-sink-sign",
                        detail: format!("sink coefficient {sink:e} < 0 in cell {c}"),
                    });
                }
                let released = frag_step(chain, psi, beta, dt);
                let a = *phi + released;
                let cand = a / (1.0 + dt * sink);
                let new_phi = match k {
                    Some(k) if cand > k => a - dt * sink * k,
                    _ => cand,
                };
                let speed = dt * truncate(new_phi, k);
                for (j, &b) in beta.iter().enumerate() {
                    if before[j] > 0.0 && speed * radv.loss_rate(j) > (-b * dt).exp() {
                        return Err(Error::Cfl {
                            limit: "r-advective",
                            dt,
                            required: dt * (-b * dt).exp() / (speed * radv.loss_rate(j)),
                        });
                    }
                }
                let mut rate = vec![0.0; nr];
                radv.apply(&before, &mut rate);
                for (p, r) in psi.iter_mut().zip(&rate) {
                    *p += speed * r;
                }
                *phi = new_phi;
                Ok(speed * radv.outflow_moment(&before))
            })
            .collect();
        let mut outflow = 0.0;
        for r in results {
            outflow += r?;
        }
        Ok(outflow * self.grid.cell_area())
    }

    /// Diagnostics of the current state (step-specific fields left at zero).
    pub fn diagnostics(&self) -> DiagnosticsRecord {
        let s = &self.state;
        let (g, ch) = (&self.grid, &self.chain);
        let mass = diagnostics::total_mass(g, ch, &s.phi, &s.psi);
        let (phi_min, _, phi_max) = diagnostics::stats(&s.phi);
        let (psi_min, _, psi_max) = diagnostics::stats(&s.psi);
        let (pt_min, pt_mean, pt_max) = diagnostics::stats(&s.psi_tilde);
        let m = |k: usize| diagnostics::domain_moment(g, ch, &s.psi, &self.moment_weights[k]);
        let nr = ch.len();
        let mut column = vec![0.0; nr];
        for slice in s.psi.chunks(nr) {
            for (a, &v) in column.iter_mut().zip(slice) {
                *a += v;
            }
        }
        let e = self.energy.last;
        DiagnosticsRecord {
            step: s.step,
            t: s.t,
            dt: 0.0,
            total_mass: mass,
            mass_drift: if self.mass0 > 0.0 {
                (mass - self.mass0) / self.mass0
            } else {
                0.0
            },
            outflow: s.totals.outflow,
            kinetic: e.kinetic,
            dissipation: e.dissipation,
            wall: e.wall,
            power: e.power,
            energy_residual: self.energy.residual,
            m0: m(0),
            m1: m(1),
            m2: m(2),
            m3: m(3),
            phi_min,
            phi_max,
            psi_min,
            psi_max,
            psi_tilde_min: pt_min,
            psi_tilde_mean: pt_mean,
            psi_tilde_max: pt_max,
            weighted_l2: diagnostics::weighted_l2(g, ch, &s.psi),
            weighted_grad: s.totals.weighted_grad,
            grad_phi: s.totals.grad_phi,
            divergence: relative_divergence(g, &s.velocity),
            poisson_iterations: 0,
            diffusion_substeps: 0,
            retries: 0,
            tail_fraction: near_cutoff_fraction(ch, &column),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = &self.state;
        Snapshot {
            t: s.t,
            step: s.step,
            grid: self.grid.clone(),
            r_edges: self.chain.edges().to_vec(),
            fields: vec![
                ("u".into(), s.velocity.u.clone()),
                ("w".into(), s.velocity.w.clone()),
                ("q".into(), s.q.clone()),
                ("phi".into(), s.phi.clone()),
                ("psi".into(), s.psi.clone()),
                ("psi_tilde".into(), s.psi_tilde.clone()),
            ],
        }
    }
}

fn update_psi_tilde(s: &mut SimState, nr: usize, weights: &[f64]) {
    s.psi_tilde
        .par_iter_mut()
        .zip(s.psi.par_chunks(nr))
        .for_each(|(t, p)| *t = weighted_average_with(p, weights));
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub t: f64,
    pub first: DiagnosticsRecord,
    pub last: DiagnosticsRecord,
    pub max_mass_drift: f64,
    pub min_phi: f64,
    pub min_psi: f64,
    pub max_phi: f64,
    pub phi_bound: f64,
    pub max_divergence: f64,
    pub retries: u64,
    pub moment_audits: Vec<(f64, MomentAudit)>,
    pub weighted: Option<WeightedAudit>,
    pub warnings: Vec<String>,
    /// Invariants that ended outside their tolerance.
    pub violations: Vec<String>,
    pub snapshots: Vec<PathBuf>,
    pub series: Vec<DiagnosticsRecord>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn report(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "steps {} t {}", self.steps, self.t);
        let _ = writeln!(s, "mass: max |drift| {:e}", self.max_mass_drift);
        let _ = writeln!(s, "psi: min {:e}", self.min_psi);
        let _ = writeln!(
            s,
            "phi: min {:e} max {:e} bound {:e} (slack {:e})",
            self.min_phi,
            self.max_phi,
            self.phi_bound,
            self.phi_bound - self.max_phi
        );
        let _ = writeln!(s, "divergence: max {:e}", self.max_divergence);
        let _ = writeln!(s, "energy residual: {:e}", self.last.energy_residual);
        let _ = writeln!(s, "retries: {}", self.retries);
        for (a, m) in &self.moment_audits {
            let _ = writeln!(
                s,
                "moment {a}: fitted rate {:e} worst {:e} bound {:e}{}",
                m.rate,
                m.worst_rate,
                m.bound_rate,
                if m.exceeded { " EXCEEDED" } else { "" }
            );
        }
        if let Some(w) = &self.weighted {
            let _ = writeln!(s, "weighted norm: initial {:e} max ratio {:e}", w.initial, w.max_ratio);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for v in &self.violations {
            let _ = writeln!(s, "violation: {v}");
        }
        let _ = writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Integrates the configured run to `t_final`. With an output directory,
/// writes `series.csv`, snapshots `snapshot_<step>.pflow` and `report.txt`;
/// on abort the series and a snapshot of the last accepted state are flushed
/// before the error is returned.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<RunSummary> {
    let mut sim = Simulation::new(config.clone())?;
    run_simulation(&mut sim, out)
}

pub fn run_simulation(sim: &mut Simulation, out: Option<&Path>) -> Result<RunSummary> {
    let cfg = sim.config.clone();
    let mut writer = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(SeriesWriter::create(&dir.join("series.csv"))?)
        }
        None => None,
    };
    let mut snapshots = Vec::new();
    let save = |sim: &Simulation, snapshots: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(dir) = out {
            let path = dir.join(format!("snapshot_{:06}.pflow", sim.state.step));
            sim.snapshot().write(&path)?;
            snapshots.push(path);
        }
        Ok(())
    };

    let first = sim.diagnostics();
    let mut series = vec![first];
    if let Some(w) = writer.as_mut() {
        w.append(&first)?;
    }
    save(sim, &mut snapshots)?;
    let mut warnings = Vec::new();
    let mut tail_warned = false;

    let t_final = cfg.time.t_final;
    while sim.state.t < t_final * (1.0 - 1e-14) {
        let dt_max = cfg.time.dt_max.min(t_final - sim.state.t);
        let rec = match sim.advance(dt_max) {
            Ok(r) => r,
            Err(e) => {
                if let Some(w) = writer.as_mut() {
                    w.flush()?;
                }
                save(sim, &mut snapshots)?;
                return Err(e);
            }
        };
        let done = sim.state.t >= t_final * (1.0 - 1e-14);
        if rec.tail_fraction > cfg.tolerances.tail && !tail_warned {
            tail_warned = true;
            let msg = format!(
                "t = {}: {:.2e} of the first moment lies within 10% of r_inf; raise r_inf",
                rec.t, rec.tail_fraction
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        series.push(rec);
        if rec.step % cfg.output.series_every == 0 || done {
            if let Some(w) = writer.as_mut() {
                w.append(&rec)?;
            }
        }
        let every = cfg.output.snapshot_every;
        if !done && every > 0 && rec.step % every == 0 {
            if let Some(w) = writer.as_mut() {
                w.flush()?;
            }
            save(sim, &mut snapshots)?;
        }
    }
    if sim.state.step > 0 {
        save(sim, &mut snapshots)?;
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }

    let summary = summarize(sim, series, warnings, snapshots);
    if let Some(dir) = out {
        std::fs::write(dir.join("report.txt"), summary.report())?;
    }
    Ok(summary)
}

/// Run-level audits of a time series against the configured tolerances:
/// mass drift, minimum and maximum principles, divergence, moment growth and
/// the weighted estimate. `phi_bound` is `max(K^2, max phi0)`.
pub fn series_audits(
    series: &[DiagnosticsRecord],
    cfg: &RunConfig,
    phi_bound: f64,
) -> (Vec<(f64, MomentAudit)>, Option<WeightedAudit>, Vec<String>) {
    let tol = &cfg.tolerances;
    let mut violations = Vec::new();
    let worst = |f: fn(&DiagnosticsRecord) -> f64| series.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let max_drift = worst(|r| r.mass_drift.abs());
    if max_drift > tol.mass {
        violations.push(format!("mass-conservation: drift {max_drift:e} > {:e}", tol.mass));
    }
    let min_psi = -worst(|r| -r.psi_min);
    if min_psi < 0.0 {
        violations.push(format!("psi-minimum-principle: min psi {min_psi:e} < 0"));
    }
    let min_phi = -worst(|r| -r.phi_min);
    if min_phi < 0.0 {
        violations.push(format!("phi-minimum-principle: min phi {min_phi:e} < 0"));
    }
    let max_phi = worst(|r| r.phi_max).max(0.0);
    let ceiling = phi_bound * (1.0 + tol.max_principle);
    if max_phi > ceiling {
        violations.push(format!(
            "phi-max-principle: max phi {max_phi:e} > max(K^2, max phi0) (1 + tol) = {ceiling:e}"
        ));
    }
    let max_div = worst(|r| r.divergence);
    if max_div > tol.divergence {
        violations.push(format!("divergence-free: {max_div:e} > {:e}", tol.divergence));
    }
    let times: Vec<f64> = series.iter().map(|r| r.t).collect();
    let mut moment_audits = Vec::new();
    for (alpha, vals) in [
        (1.0, series.iter().map(|r| r.m1).collect::<Vec<_>>()),
        (THETA1_STAR, series.iter().map(|r| r.m2).collect()),
    ] {
        if let Some(a) = diagnostics::moment_growth_audit(&times, &vals, alpha, cfg.coefficients.k_const, max_phi) {
            if a.exceeded {
                violations.push(format!(
                    "moment-growth: M_{alpha} grows faster than rate {:e}",
                    a.bound_rate
                ));
            }
            moment_audits.push((alpha, a));
        }
    }
    let weighted = diagnostics::weighted_l2_audit(series, Some(tol.weighted_growth));
    if let Some(w) = &weighted {
        if w.exceeded {
            violations.push(format!(
                "weighted-estimate: ratio {:e} > {:e}",
                w.max_ratio, tol.weighted_growth
            ));
        }
    }
    (moment_audits, weighted, violations)
}

fn summarize(
    sim: &Simulation,
    series: Vec<DiagnosticsRecord>,
    warnings: Vec<String>,
    snapshots: Vec<PathBuf>,
) -> RunSummary {
    let cfg = &sim.config;
    let first = series[0];
    let last = *series.last().unwrap_or(&first);
    let fold = |f: fn(&DiagnosticsRecord) -> f64, init: f64, g: fn(f64, f64) -> f64| series.iter().map(f).fold(init, g);
    let max_mass_drift = fold(|r| r.mass_drift.abs(), 0.0, f64::max);
    let min_phi = fold(|r| r.phi_min, f64::INFINITY, f64::min);
    let min_psi = fold(|r| r.psi_min, f64::INFINITY, f64::min);
    let max_phi = fold(|r| r.phi_max, 0.0, f64::max);
    let max_divergence = fold(|r| r.divergence, 0.0, f64::max);
    let retries = series.iter().map(|r| r.retries).sum();

    let (moment_audits, weighted, violations) = series_audits(&series, cfg, sim.phi_bound);
    RunSummary {
        steps: sim.state.step,
        t: sim.state.t,
        first,
        last,
        max_mass_drift,
        min_phi,
        min_psi,
        max_phi,
        phi_bound: sim.phi_bound,
        max_divergence,
        retries,
        moment_audits,
        weighted,
        warnings,
        violations,
        snapshots,
        series,
    }
}

//! Spatially homogeneous prion model: chains grow at the constant rate
//! `tau_const phi`, fragment with the uniform kernel, and the monomer pool
//! exchanges with them. Zero influx at `r0`. Classical RK4 in time over the
//! same r-discretization as the full model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragmentation::{frag_apply, moment, monomer_gain, ChainGrid};
use crate::initial::bump;
use crate::model::{ModelCoefficients, SymTensor};
use crate::psi_solver::RAdvection;

/// `[zero_dim]` section of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroDimConfig {
    pub nr: usize,
    pub r_inf: f64,
    pub t_final: f64,
    /// Fixed step; when absent the step is `cfl_r` times the r-advective limit
    /// at the initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub cfl_r: f64,
    pub phi0: f64,
    pub psi_height: f64,
    pub psi_lo: f64,
    pub psi_hi: f64,
    /// Trajectory sample every this many steps (the last step is always kept).
    pub sample_every: usize,
}

impl Default for ZeroDimConfig {
    fn default() -> Self {
        ZeroDimConfig {
            nr: 2048,
            r_inf: 6.0,
            t_final: 10.0,
            dt: None,
            cfl_r: 0.5,
            phi0: 0.2,
            psi_height: 0.05,
            psi_lo: 1.5,
            psi_hi: 3.0,
            sample_every: 100,
        }
    }
}

impl ZeroDimConfig {
    pub fn check(&self, r0: f64) -> Result<()> {
        if self.nr < 2 {
            return Err(Error::constraint("zero_dim.nr >= 2", self.nr.to_string()));
        }
        if !(r0 <= self.psi_lo && self.psi_lo < self.psi_hi && self.psi_hi <= self.r_inf) {
            return Err(Error::constraint(
                "r0 <= zero_dim.psi_lo < psi_hi <= r_inf",
                format!("[{}, {}] in [{r0}, {}]", self.psi_lo, self.psi_hi, self.r_inf),
            ));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::constraint("zero_dim.t_final >= 0", self.t_final.to_string()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::constraint("zero_dim.dt > 0", dt.to_string()));
            }
        }
        if !(self.cfl_r > 0.0 && self.cfl_r <= 1.0) {
            return Err(Error::constraint("0 < zero_dim.cfl_r <= 1", self.cfl_r.to_string()));
        }
        if !(self.phi0 >= 0.0 && self.psi_height >= 0.0) {
            return Err(Error::constraint(
                "zero_dim.phi0, psi_height >= 0",
                format!("{} {}", self.phi0, self.psi_height),
            ));
        }
        if self.sample_every == 0 {
            return Err(Error::constraint("zero_dim.sample_every > 0", "0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDimState {
    pub psi: Vec<f64>,
    pub phi: f64,
    pub t: f64,
}

/// Discretized right-hand side.
#[derive(Debug, Clone)]
pub struct ZeroDimModel {
    pub chain: ChainGrid,
    pub tau: f64,
    pub beta: Vec<f64>,
    pub radv: RAdvection,
}

impl ZeroDimModel {
    /// Constant growth rate `tau_const` and the coefficient family's `beta`
    /// at rest.
    pub fn new(chain: ChainGrid, coeffs: &ModelCoefficients) -> Result<Self> {
        let tau = coeffs.tau_const;
        if !(tau > 0.0) {
            return Err(Error::constraint("tau_const > 0", tau.to_string()));
        }
        let beta = chain
            .centers()
            .iter()
            .map(|&r| (coeffs.beta)(r, [0.0, 0.0], &SymTensor::default()))
            .collect();
        Ok(Self::with_rates(chain, tau, beta))
    }

    pub fn with_rates(chain: ChainGrid, tau: f64, beta: Vec<f64>) -> Self {
        let radv = RAdvection::constant(&chain, tau);
        ZeroDimModel { chain, tau, beta, radv }
    }

    pub fn initial_state(&self, cfg: &ZeroDimConfig) -> ZeroDimState {
        ZeroDimState {
            psi: self.chain.project(|r| cfg.psi_height * bump(r, cfg.psi_lo, cfg.psi_hi)),
            phi: cfg.phi0,
            t: 0.0,
        }
    }

    /// `(d psi/dt, d phi/dt)`.
    pub fn rhs(&self, psi: &[f64], phi: f64, dpsi: &mut [f64]) -> f64 {
        frag_apply(&self.chain, psi, &self.beta, dpsi);
        let mut adv = vec![0.0; psi.len()];
        self.radv.apply(psi, &mut adv);
        for (d, a) in dpsi.iter_mut().zip(&adv) {
            *d += phi * a;
        }
        monomer_gain(&self.chain, psi, &self.beta) - phi * self.radv.sink_coefficient(psi, self.chain.widths())
    }

    /// `phi + M_1(psi)`
    pub fn mass(&self, s: &ZeroDimState) -> f64 {
        s.phi + moment(&self.chain, &s.psi, 1.0)
    }

    /// Largest `dt` with `dt phi max_rate <= cfl`.
    pub fn stable_dt(&self, phi: f64, cfl: f64) -> f64 {
        let rate = phi * self.radv.max_rate();
        if rate > 0.0 {
            cfl / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn rk4_step(&self, s: &mut ZeroDimState, dt: f64) {
        let n = s.psi.len();
        let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut kp = [0.0; 4];
        let mut tmp = vec![0.0; n];
        kp[0] = self.rhs(&s.psi, s.phi, &mut k[0]);
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { 0.5 * dt };
            let (prev, rest) = k.split_at_mut(stage);
            for j in 0..n {
                tmp[j] = s.psi[j] + h * prev[stage - 1][j];
            }
            let phi = s.phi + h * kp[stage - 1];
            kp[stage] = self.rhs(&tmp, phi, &mut rest[0]);
        }
        for j in 0..n {
            s.psi[j] += dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
        s.phi += dt / 6.0 * (kp[0] + 2.0 * kp[1] + 2.0 * kp[2] + kp[3]);
        s.t += dt;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDimSample {
    pub t: f64,
    pub phi: f64,
    pub m0: f64,
    pub m1: f64,
    pub mass: f64,
    pub psi_min: f64,
}

impl ZeroDimSample {
    pub const COLUMNS: [&'static str; 6] = ["t", "phi", "m0", "m1", "mass", "psi_min"];

    pub fn values(&self) -> [f64; 6] {
        [self.t, self.phi, self.m0, self.m1, self.mass, self.psi_min]
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<ZeroDimSample>,
    pub state: ZeroDimState,
    pub steps: usize,
}

impl Trajectory {
    /// `max_t |E(t) - E(0)| / E(0)`.
    pub fn max_drift(&self) -> f64 {
        let e0 = self.samples[0].mass;
        if e0 == 0.0 {
            return 0.0;
        }
        self.samples
            .iter()
            .map(|s| ((s.mass - e0) / e0).abs())
            .fold(0.0, f64::max)
    }
}

fn sample(model: &ZeroDimModel, s: &ZeroDimState) -> ZeroDimSample {
    ZeroDimSample {
        t: s.t,
        phi: s.phi,
        m0: moment(&model.chain, &s.psi, 0.0),
        m1: moment(&model.chain, &s.psi, 1.0),
        mass: model.mass(s),
        psi_min: s.psi.iter().fold(f64::INFINITY, |m, &x| m.min(x)),
    }
}

/// RK4 with `ceil(t_final / dt)` equal steps. Every step is checked against
/// the r-advective limit `dt phi max_rate <= cfl`.
pub fn integrate(
    model: &ZeroDimModel,
    mut state: ZeroDimState,
    t_final: f64,
    dt: f64,
    cfl: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    let steps = if t_final > 0.0 {
        (t_final / dt).ceil() as usize
    } else {
        0
    };
    let h = if steps > 0 { t_final / steps as f64 } else { dt };
    let t0 = state.t;
    let mut samples = vec![sample(model, &state)];
    for n in 1..=steps {
        let limit = model.stable_dt(state.phi, cfl);
        if h > limit {
            return Err(Error::Cfl {
                limit: "r-advective",
                dt: h,
                required: limit,
            });
        }
        model.rk4_step(&mut state, h);
        state.t = t0 + n as f64 * h;
        if n % sample_every.max(1) == 0 || n == steps {
            samples.push(sample(model, &state));
        }
    }
    Ok(Trajectory { samples, state, steps })
}

/// Builds the model from the configuration and integrates it.
pub fn run_zero_dim(cfg: &ZeroDimConfig, coeffs: &ModelCoefficients) -> Result<Trajectory> {
    cfg.check(coeffs.r0)?;
    let chain = ChainGrid::uniform(coeffs.r0, cfg.r_inf, cfg.nr)?;
    let model = ZeroDimModel::new(chain, coeffs)?;
    let s = model.initial_state(cfg);
    let dt = cfg.dt.unwrap_or_else(|| {
        // monomers can only grow back to the total mass
        let bound = model.mass(&s).max(s.phi);
        model
            .stable_dt(bound, cfg.cfl_r)
            .min(cfg.t_final.max(f64::MIN_POSITIVE))
    });
    integrate(&model, s, cfg.t_final, dt, 1.0, cfg.sample_every)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(n: usize) -> ZeroDimModel {
        ZeroDimModel::new(ChainGrid::uniform(1.0, 11.0, n).unwrap(), &ModelCoefficients::default()).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let m = model(64);
        let mut d = vec![1.0; 64];
        assert_eq!(m.rhs(&vec![0.0; 64], 0.7, &mut d), 0.0);
        assert!(d.iter().all(|&x| x == 0.0));
        let tr = integrate(
            &m,
            ZeroDimState {
                psi: vec![0.0; 64],
                phi: 0.7,
                t: 0.0,
            },
            1.0,
            0.01,
            1.0,
            10,
        )
        .unwrap();
        assert_eq!(tr.state.phi, 0.7);
        assert!(tr.state.psi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn no_monomers_no_fragmentation_is_frozen() {
        let chain = ChainGrid::uniform(1.0, 11.0, 64).unwrap();
        let m = ZeroDimModel::with_rates(chain, 1.0, vec![0.0; 64]);
        let psi: Vec<f64> = (0..64).map(|j| (j % 5) as f64).collect();
        let mut d = vec![1.0; 64];
        let dphi = m.rhs(&psi, 0.0, &mut d);
        assert_eq!(dphi, 0.0);
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let m = model(64);
        let s = ZeroDimState {
            psi: vec![0.1; 64],
            phi: 5.0,
            t: 0.0,
        };
        assert!(matches!(integrate(&m, s, 1.0, 0.5, 0.5, 1), Err(Error::Cfl { .. })));
    }

    proptest! {
        #[test]
        fn mass_rate_is_the_quadrature_residual(psi in prop::collection::vec(0.0f64..2.0, 100), phi in 0.0f64..3.0) {
            // d/dt(phi + M1) = -phi * outflow + sum g_k dr_k^2 / 4
            let m = model(100);
            let mut d = vec![0.0; 100];
            let dphi = m.rhs(&psi, phi, &mut d);
            let (r, w) = (m.chain.centers(), m.chain.widths());
            let dm1: f64 = d.iter().zip(r).zip(w).map(|((a, r), w)| a * r * w).sum();
            let resid: f64 = (0..100).map(|k| m.beta[k] * psi[k] / r[k] * w[k] * w[k] * w[k] / 4.0).sum();
            let expect = -phi * m.radv.outflow_moment(&psi) + resid;
            let scale = 1.0 + dm1.abs() + dphi.abs();
            prop_assert!((dphi + dm1 - expect).abs() < 1e-12 * scale);
        }

        #[test]
        fn rhs_is_linear_in_psi(a in prop::collection::vec(0.0f64..2.0, 50), b in prop::collection::vec(0.0f64..2.0, 50), phi in 0.0f64..3.0) {
            let m = ZeroDimModel::new(ChainGrid::uniform(1.0, 11.0, 50).unwrap(), &ModelCoefficients::default()).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let (mut da, mut db, mut ds) = (vec![0.0; 50], vec![0.0; 50], vec![0.0; 50]);
            let pa = m.rhs(&a, phi, &mut da);
            let pb = m.rhs(&b, phi, &mut db);
            let ps = m.rhs(&sum, phi, &mut ds);
            prop_assert!((pa + pb - ps).abs() < 1e-12 * (1.0 + ps.abs()));
            for j in 0..50 {
                prop_assert!((da[j] + db[j] - ds[j]).abs() < 1e-12 * (1.0 + ds[j].abs()));
            }
        }
    }
}

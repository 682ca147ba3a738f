//! Model coefficients: diffusion, polymerization and fragmentation rates,
//! the averaging weight for the mean chain length, and the viscosity closure.
//!
//! Every coefficient is a plain closure so that constructed counter-examples
//! (used by the assumption validator) go through exactly the same code paths
//! as the default family.

mod validate;
mod viscosity;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragmentation::ChainGrid;

pub use validate::{validate_coefficients, Assumption, AssumptionReport, SampleSpec, ValidationReport};
pub use viscosity::{stress, ViscosityClosure};

/// Spatial dimension of the flow solver.
pub const DIM: usize = 2;

/// Symmetric 2x2 tensor stored as `(xx, xy, yy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor { xx, xy, yy }
    }

    /// Frobenius inner product `A : B`.
    pub fn dot(&self, other: &SymTensor) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> SymTensor {
        SymTensor::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        SymTensor::new(self.xx - other.xx, self.xy - other.xy, self.yy - other.yy)
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Fragmentation rate `beta(r, v, D)`.
pub type RateFn = Arc<dyn Fn(f64, [f64; 2], &SymTensor) -> f64 + Send + Sync>;
/// Fragmentation kernel `kappa(r, r_tilde)`.
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Which viscosity closure the configuration selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureKind {
    /// `nu_ref * exp(c_F * min(sqrt(psi~), cap)) * (delta^2 + |D|^2)^((p-2)/2) + nu_inf`
    PowerLawFlory,
    /// `(nu_inf + (nu_ref - nu_inf) / (1 + psi~)) * (delta^2 + |D|^2)^((p-2)/2)`
    Crossover,
}

/// Parameters of the default coefficient family. This is what the run
/// configuration stores in its `[coefficients]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientParams {
    /// Minimal chain length.
    pub r0: f64,
    /// Polymer diffusion rate at `r0`; `A(r) = a_max / (1 + (r - r0))`.
    pub a_max: f64,
    /// Monomer diffusion constant.
    pub a0: f64,
    /// `tau(r) = tau_max * (1 - exp(-k_tau (r - r0)))`
    pub tau_max: f64,
    pub k_tau: f64,
    /// Constant polymerization rate of the spatially homogeneous model.
    pub tau_const: f64,
    /// `beta = beta0 * r/(1+r) * (1 + b1 |D|^2/(1+|D|^2)) * (1 + b_v |v|^2/(1+|v|^2))`
    pub beta0: f64,
    pub b1: f64,
    pub b_v: f64,
    /// Wall friction coefficient of the Navier slip condition.
    pub alpha_star: f64,
    /// Structural constant shared by all coefficient bounds.
    pub k_const: f64,
    pub closure: ClosureKind,
    pub p: f64,
    pub nu_ref: f64,
    pub nu_inf: f64,
    pub c_flory: f64,
    pub flory_cap: f64,
    pub delta_nu: f64,
}

impl Default for CoefficientParams {
    fn default() -> Self {
        CoefficientParams {
            r0: 1.0,
            a_max: 0.05,
            a0: 0.1,
            tau_max: 1.0,
            k_tau: 1.0,
            tau_const: 1.0,
            beta0: 0.4,
            b1: 0.5,
            b_v: 0.0,
            alpha_star: 0.1,
            k_const: 10.0,
            closure: ClosureKind::PowerLawFlory,
            p: 2.5,
            nu_ref: 0.1,
            nu_inf: 0.02,
            c_flory: 0.3,
            flory_cap: 10.0,
            delta_nu: 1e-4,
        }
    }
}

impl CoefficientParams {
    /// Parameter-level constraints. Each failure names the assumption it
    /// protects.
    pub fn check(&self) -> Result<()> {
        let finite = [
            ("r0", self.r0),
            ("a_max", self.a_max),
            ("a0", self.a0),
            ("tau_max", self.tau_max),
            ("k_tau", self.k_tau),
            ("tau_const", self.tau_const),
            ("beta0", self.beta0),
            ("b1", self.b1),
            ("b_v", self.b_v),
            ("alpha_star", self.alpha_star),
            ("k_const", self.k_const),
            ("p", self.p),
            ("nu_ref", self.nu_ref),
            ("nu_inf", self.nu_inf),
            ("c_flory", self.c_flory),
            ("flory_cap", self.flory_cap),
            ("delta_nu", self.delta_nu),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} = {v}")));
            }
        }
        if self.r0 <= 0.0 {
            return Err(Error::constraint(
                "r0 > 0",
                format!("r0 = {} (a positive minimal chain length is required)", self.r0),
            ));
        }
        if self.a_max <= 0.0 {
            return Err(Error::constraint("A1", format!("a_max = {} must be > 0", self.a_max)));
        }
        if self.a0 <= 0.0 {
            return Err(Error::constraint("A0 > 0", format!("a0 = {} must be > 0", self.a0)));
        }
        if self.tau_max <= 0.0 || self.k_tau <= 0.0 {
            return Err(Error::constraint(
                "A2",
                format!("tau_max = {} and k_tau = {} must both be > 0", self.tau_max, self.k_tau),
            ));
        }
        if self.tau_const <= 0.0 {
            return Err(Error::constraint(
                "A2",
                format!("tau_const = {} must be > 0", self.tau_const),
            ));
        }
        if self.beta0 <= 0.0 || self.b1 < 0.0 || self.b_v < 0.0 {
            return Err(Error::constraint(
                "A3",
                format!(
                    "beta0 = {} must be > 0 and b1 = {}, b_v = {} must be >= 0",
                    self.beta0, self.b1, self.b_v
                ),
            ));
        }
        if self.alpha_star < 0.0 {
            return Err(Error::constraint(
                "alpha* >= 0",
                format!("alpha_star = {}", self.alpha_star),
            ));
        }
        if self.k_const <= 0.0 {
            return Err(Error::constraint("K > 0", format!("k_const = {}", self.k_const)));
        }
        let p_min = 2.0 * DIM as f64 / (DIM as f64 + 2.0);
        if self.p <= p_min {
            return Err(Error::constraint(
                "A6",
                format!("p = {} must exceed 2d/(d+2) = {p_min}", self.p),
            ));
        }
        if self.nu_ref <= 0.0 || self.nu_inf < 0.0 || self.delta_nu <= 0.0 {
            return Err(Error::constraint(
                "A6",
                format!(
                    "nu_ref = {} > 0, nu_inf = {} >= 0 and delta_nu = {} > 0 required",
                    self.nu_ref, self.nu_inf, self.delta_nu
                ),
            ));
        }
        if self.c_flory < 0.0 || self.flory_cap <= 0.0 {
            return Err(Error::constraint(
                "A6",
                format!(
                    "c_flory = {} >= 0 and flory_cap = {} > 0 required",
                    self.c_flory, self.flory_cap
                ),
            ));
        }
        Ok(())
    }
}

/// All coefficient functions and constants of the coupled model.
#[derive(Clone)]
pub struct ModelCoefficients {
    pub r0: f64,
    /// Polymer diffusion rate `A(r)`.
    pub diffusion: ScalarFn,
    /// Monomer diffusion constant `A0`.
    pub a0: f64,
    pub tau: ScalarFn,
    /// Analytic derivative of `tau`.
    pub tau_prime: ScalarFn,
    /// Constant rate of the homogeneous (zero-dimensional) model.
    pub tau_const: f64,
    pub beta: RateFn,
    /// Upper envelope of `d_r beta / beta` over `(v, D)`.
    pub eta: ScalarFn,
    pub gamma: ScalarFn,
    pub theta: f64,
    pub kernel: KernelFn,
    pub viscosity: ViscosityClosure,
    pub p: f64,
    pub alpha_star: f64,
    pub k_const: f64,
}

impl fmt::Debug for ModelCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelCoefficients")
            .field("r0", &self.r0)
            .field("a0", &self.a0)
            .field("tau_const", &self.tau_const)
            .field("theta", &self.theta)
            .field("viscosity", &self.viscosity)
            .field("p", &self.p)
            .field("alpha_star", &self.alpha_star)
            .field("k_const", &self.k_const)
            .finish_non_exhaustive()
    }
}

/// Uniform binary-fragmentation kernel: `1/r~` for `r~ > r0`, `0 < r < r~`.
pub fn uniform_kernel(r0: f64) -> KernelFn {
    Arc::new(
        move |r: f64, rt: f64| {
            if rt > r0 && r > 0.0 && r < rt {
                1.0 / rt
            } else {
                0.0
            }
        },
    )
}

impl ModelCoefficients {
    /// Builds the default coefficient family from its parameters.
    pub fn from_params(params: &CoefficientParams) -> Result<Self> {
        params.check()?;
        let r0 = params.r0;
        let (a_max, tau_max, k_tau) = (params.a_max, params.tau_max, params.k_tau);
        let (beta0, b1, b_v) = (params.beta0, params.b1, params.b_v);
        let diffusion: ScalarFn = Arc::new(move |r: f64| a_max / (1.0 + (r - r0)));
        let tau: ScalarFn = Arc::new(move |r: f64| -tau_max * (-k_tau * (r - r0)).exp_m1());
        let tau_prime: ScalarFn = Arc::new(move |r: f64| tau_max * k_tau * (-k_tau * (r - r0)).exp());
        let beta: RateFn = Arc::new(move |r: f64, v: [f64; 2], d: &SymTensor| {
            let d2 = d.norm_sq();
            let v2 = v[0] * v[0] + v[1] * v[1];
            beta0 * (r / (1.0 + r)) * (1.0 + b1 * d2 / (1.0 + d2)) * (1.0 + b_v * v2 / (1.0 + v2))
        });
        // d_r log(r/(1+r)); the (v, D) factors do not depend on r
        let eta: ScalarFn = Arc::new(|r: f64| 1.0 / (r * (1.0 + r)));
        let gamma: ScalarFn = Arc::new(|r: f64| r);
        Ok(ModelCoefficients {
            r0,
            diffusion,
            a0: params.a0,
            tau,
            tau_prime,
            tau_const: params.tau_const,
            beta,
            eta,
            gamma,
            theta: 1.0,
            kernel: uniform_kernel(r0),
            viscosity: ViscosityClosure::from_params(params),
            p: params.p,
            alpha_star: params.alpha_star,
            k_const: params.k_const,
        })
    }

    /// `d_r (r tau(r)) = tau + r tau'`.
    pub fn d_r_tau(&self, r: f64) -> f64 {
        (self.tau)(r) + r * (self.tau_prime)(r)
    }

    /// Viscosity `nu(psi~, |D|)`.
    pub fn nu(&self, psi_tilde: f64, shear: f64) -> Result<f64> {
        self.viscosity.eval(psi_tilde, shear)
    }

    /// Lowest admissible threshold of the monomer maximum principle, `K^2`.
    pub fn phi_ceiling(&self) -> f64 {
        self.k_const * self.k_const
    }
}

impl Default for ModelCoefficients {
    fn default() -> Self {
        ModelCoefficients::from_params(&CoefficientParams::default())
            .expect("default coefficient parameters are admissible")
    }
}

/// `psi~ = int gamma(r) psi(r) dr` by midpoint quadrature on the chain grid.
pub fn weighted_average(psi: &[f64], grid: &ChainGrid, gamma: &dyn Fn(f64) -> f64) -> f64 {
    psi.iter()
        .zip(grid.centers())
        .zip(grid.widths())
        .map(|((&p, &r), &w)| gamma(r) * p * w)
        .sum()
}

/// Same quadrature with the weights `gamma(r_j) dr_j` precomputed.
pub fn weighted_average_with(psi: &[f64], weights: &[f64]) -> f64 {
    psi.iter().zip(weights).map(|(&p, &w)| p * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tau_vanishes_at_r0() {
        let c = ModelCoefficients::default();
        assert_eq!((c.tau)(c.r0), 0.0);
        assert!((c.tau_prime)(c.r0) > 0.0);
    }

    #[test]
    fn tau_prime_matches_finite_difference() {
        let c = ModelCoefficients::default();
        for &r in &[1.1, 2.0, 5.0, 17.0] {
            let h = 1e-6;
            let fd = ((c.tau)(r + h) - (c.tau)(r - h)) / (2.0 * h);
            assert!((fd - (c.tau_prime)(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_r0() {
        let params = CoefficientParams {
            r0: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            ModelCoefficients::from_params(&params),
            Err(Error::ConfigConstraint { .. })
        ));
    }

    #[test]
    fn rejects_negative_tau_max_naming_a2() {
        let params = CoefficientParams {
            tau_max: -1.0,
            ..Default::default()
        };
        let err = params.check().unwrap_err().to_string();
        assert!(err.contains("A2"), "{err}");
    }

    #[test]
    fn weighted_average_of_zero_is_zero() {
        let grid = ChainGrid::uniform(1.0, 11.0, 100).unwrap();
        let psi = vec![0.0; 100];
        assert_eq!(weighted_average(&psi, &grid, &|r| r), 0.0);
    }

    #[test]
    fn weighted_average_unit_box() {
        // gamma = 1, psi = 1 on [r0, r0 + 1]
        let grid = ChainGrid::uniform(1.0, 11.0, 1000).unwrap();
        let psi: Vec<f64> = grid
            .centers()
            .iter()
            .map(|&r| if r < 2.0 { 1.0 } else { 0.0 })
            .collect();
        let v = weighted_average(&psi, &grid, &|_| 1.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_average_linear_weight_box_converges() {
        // gamma(r) = r, psi = h on [a, b]: exact h (b^2 - a^2) / 2
        let (h, a, b) = (0.7, 2.3, 5.9);
        let exact = h * (b * b - a * a) / 2.0;
        let mut errs = Vec::new();
        for n in [100, 200, 400, 800] {
            let grid = ChainGrid::uniform(1.0, 11.0, n).unwrap();
            let edges = grid.edges();
            // cell averages of the box
            let psi: Vec<f64> = (0..n)
                .map(|j| {
                    let (lo, hi) = (edges[j].max(a), edges[j + 1].min(b));
                    if hi > lo {
                        h * (hi - lo) / (edges[j + 1] - edges[j])
                    } else {
                        0.0
                    }
                })
                .collect();
            errs.push((weighted_average(&psi, &grid, &|r| r) - exact).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * 0.6 + 1e-14, "{errs:?}");
        }
        assert!(errs[3] < 1e-4);
    }
}

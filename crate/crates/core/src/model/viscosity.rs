use std::fmt;
use std::sync::Arc;

use super::{ClosureKind, CoefficientParams, ModelCoefficients, SymTensor};
use crate::error::{Error, Result};

/// Viscosity as a function of the mean chain length and the shear rate `|D|`.
#[derive(Clone)]
pub enum ViscosityClosure {
    /// Flory-type exponential in the square root of the mean chain length,
    /// times a regularized power law in the shear rate.
    PowerLawFlory {
        nu_ref: f64,
        nu_inf: f64,
        c_flory: f64,
        cap: f64,
        delta: f64,
        p: f64,
    },
    /// Chain-length crossover between `nu_ref` (short chains) and `nu_inf`.
    Crossover {
        nu_ref: f64,
        nu_inf: f64,
        delta: f64,
        p: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ViscosityClosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViscosityClosure::PowerLawFlory {
                nu_ref,
                nu_inf,
                c_flory,
                cap,
                delta,
                p,
            } => f
                .debug_struct("PowerLawFlory")
                .field("nu_ref", nu_ref)
                .field("nu_inf", nu_inf)
                .field("c_flory", c_flory)
                .field("cap", cap)
                .field("delta", delta)
                .field("p", p)
                .finish(),
            ViscosityClosure::Crossover {
                nu_ref,
                nu_inf,
                delta,
                p,
            } => f
                .debug_struct("Crossover")
                .field("nu_ref", nu_ref)
                .field("nu_inf", nu_inf)
                .field("delta", delta)
                .field("p", p)
                .finish(),
            ViscosityClosure::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ViscosityClosure {
    pub fn from_params(params: &CoefficientParams) -> Self {
        match params.closure {
            ClosureKind::PowerLawFlory => ViscosityClosure::PowerLawFlory {
                nu_ref: params.nu_ref,
                nu_inf: params.nu_inf,
                c_flory: params.c_flory,
                cap: params.flory_cap,
                delta: params.delta_nu,
                p: params.p,
            },
            ClosureKind::Crossover => ViscosityClosure::Crossover {
                nu_ref: params.nu_ref,
                nu_inf: params.nu_inf,
                delta: params.delta_nu,
                p: params.p,
            },
        }
    }

    pub fn eval(&self, psi_tilde: f64, shear: f64) -> Result<f64> {
        if !psi_tilde.is_finite() {
            return Err(Error::NonFinite(format!("mean chain length {psi_tilde}")));
        }
        let psi_tilde = psi_tilde.max(0.0);
        let nu = match *self {
            ViscosityClosure::PowerLawFlory {
                nu_ref,
                nu_inf,
                c_flory,
                cap,
                delta,
                p,
            } => {
                let flory = (c_flory * psi_tilde.sqrt().min(cap)).exp();
                nu_ref * flory * shear_factor(delta, shear, p) + nu_inf
            }
            ViscosityClosure::Crossover {
                nu_ref,
                nu_inf,
                delta,
                p,
            } => (nu_inf + (nu_ref - nu_inf) / (1.0 + psi_tilde)) * shear_factor(delta, shear, p),
            ViscosityClosure::Custom(ref f) => f(psi_tilde, shear),
        };
        if !nu.is_finite() {
            return Err(Error::NonFinite(format!(
                "viscosity at psi~ = {psi_tilde}, |D| = {shear}"
            )));
        }
        Ok(nu)
    }

    /// Shear exponent, if the closure has one.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            ViscosityClosure::PowerLawFlory { p, .. } | ViscosityClosure::Crossover { p, .. } => Some(p),
            ViscosityClosure::Custom(_) => None,
        }
    }
}

fn shear_factor(delta: f64, shear: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (delta * delta + shear * shear).powf(0.5 * (p - 2.0))
    }
}

/// Viscous stress `S = nu(psi~, |D|) D`.
pub fn stress(coeffs: &ModelCoefficients, psi_tilde: f64, d: &SymTensor) -> Result<SymTensor> {
    Ok(d.scale(coeffs.nu(psi_tilde, d.norm())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flory(p: f64) -> ModelCoefficients {
        ModelCoefficients::from_params(&CoefficientParams {
            p,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn inactive_modulations_give_reference_plus_background() {
        let c = flory(2.0);
        let params = CoefficientParams::default();
        let nu = c.nu(0.0, 0.0).unwrap();
        assert!((nu - (params.nu_ref + params.nu_inf)).abs() < 1e-15);
    }

    #[test]
    fn flory_nondecreasing_in_mean_length_up_to_cap() {
        let c = flory(2.5);
        let params = CoefficientParams::default();
        let top = params.flory_cap * params.flory_cap * 1.5;
        for &shear in &[0.0, 0.3, 4.0] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..1000 {
                let psi_t = top * k as f64 / 999.0;
                let nu = c.nu(psi_t, shear).unwrap();
                assert!(nu >= prev, "decrease at psi~ = {psi_t}");
                prev = nu;
            }
        }
    }

    #[test]
    fn log_viscosity_affine_in_root_mean_length() {
        let c = flory(2.0);
        let params = CoefficientParams::default();
        // least-squares slope of ln(nu - nu_inf) against sqrt(psi~), below the cap
        let xs: Vec<f64> = (0..50).map(|k| 0.15 * k as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&s| (c.nu(s * s, 0.0).unwrap() - params.nu_inf).ln())
            .collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        assert!((sxy / sxx - params.c_flory).abs() < 1e-10);
    }

    #[test]
    fn stress_is_symmetric_multiple_of_strain() {
        let c = flory(2.5);
        let d = SymTensor::new(0.3, -0.2, -0.3);
        let s = stress(&c, 2.0, &d).unwrap();
        let nu = c.nu(2.0, d.norm()).unwrap();
        assert!((s.xy - nu * d.xy).abs() < 1e-15);
        assert!((s.xx - nu * d.xx).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_mean_length() {
        let c = flory(2.5);
        assert!(c.nu(f64::NAN, 1.0).is_err());
        assert!(c.nu(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn crossover_interpolates_between_limits() {
        let c = ModelCoefficients::from_params(&CoefficientParams {
            closure: ClosureKind::Crossover,
            p: 2.0,
            ..Default::default()
        })
        .unwrap();
        let params = CoefficientParams::default();
        assert!((c.nu(0.0, 1.0).unwrap() - params.nu_ref).abs() < 1e-15);
        assert!((c.nu(1e12, 1.0).unwrap() - params.nu_inf).abs() < 1e-10);
    }
}

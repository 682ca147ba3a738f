//! Free monomer concentration `phi(t, x)`: x-transport, polymerization sink
//! (implicit) and release of short fragments (explicit, nonnegative).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fragmentation::{monomer_gain, ChainGrid};
use crate::grid::SpatialGrid;
use crate::psi_solver::{check_nonnegative, RAdvection};
use crate::transport::{advect, diffuse, AdvectionScheme};

/// `T_k(s) = min(|s|, k) sign s`.
pub fn truncate(s: f64, k: Option<f64>) -> f64 {
    match k {
        Some(k) => s.abs().min(k).copysign(s),
        None => s,
    }
}

/// Implicit sink, explicit gain: `(phi* + gain) / (1 + dt s)`, where `gain`
/// is the amount released over the step.
#[inline]
pub fn react(phi_star: f64, sink: f64, gain: f64, dt: f64) -> f64 {
    (phi_star + gain) / (1.0 + dt * sink)
}

/// x-advection then diffusion with constant `a0`.
pub fn transport_phi(
    grid: &SpatialGrid,
    scheme: AdvectionScheme,
    u: &[f64],
    w: &[f64],
    dt: f64,
    a0: f64,
    phi: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<usize> {
    scratch.resize(phi.len(), 0.0);
    advect(scheme, grid, u, w, dt, 1, phi, scratch)?;
    std::mem::swap(phi, scratch);
    Ok(diffuse(grid, &[a0], dt, 1, phi, scratch))
}

/// Sequential monomer step after `psi` has been advanced: transport, then
/// the reaction with sink and gain evaluated on the new `psi`.
#[allow(clippy::too_many_arguments)]
pub fn step_phi(
    grid: &SpatialGrid,
    chain: &ChainGrid,
    radv: &RAdvection,
    scheme: AdvectionScheme,
    u: &[f64],
    w: &[f64],
    dt: f64,
    a0: f64,
    psi: &[f64],
    beta: &[f64],
    phi: &mut Vec<f64>,
) -> Result<usize> {
    let nr = chain.len();
    let mut scratch = Vec::new();
    let subs = transport_phi(grid, scheme, u, w, dt, a0, phi, &mut scratch)?;
    let results: Vec<Result<f64>> = phi
        .par_iter()
        .enumerate()
        .map(|(c, &p)| {
            let slice = &psi[c * nr..(c + 1) * nr];
            let s = radv.sink_coefficient(slice, chain.widths());
            if s < 0.0 {
                return Err(Error::InvariantBreach {
                    invariant: "polymer-sink-sign",
                    detail: format!("sink coefficient {s:e} < 0 in cell {c}"),
                });
            }
            let g = monomer_gain(chain, slice, &beta[c * nr..(c + 1) * nr]);
            Ok(react(p, s, dt * g, dt))
        })
        .collect();
    for (p, r) in phi.iter_mut().zip(results) {
        *p = r?;
    }
    check_nonnegative("phi-minimum-principle", phi, 0.0)?;
    Ok(subs)
}

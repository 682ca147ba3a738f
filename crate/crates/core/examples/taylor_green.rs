//! Newtonian Taylor-Green vortex on a periodic box. With `nu D` stress the
//! kinetic energy decays like `exp(-2 nu t)`.

use polyflow::coupling::{run, RunConfig};
use polyflow::grid::Boundary;
use polyflow::initial::VelocityInit;

fn main() -> polyflow::Result<()> {
    let nu = 0.05;
    let mut c = RunConfig::default();
    c.grid.nx = 64;
    c.grid.ny = 64;
    c.grid.nr = 8;
    c.grid.bx = Boundary::Periodic;
    c.grid.by = Boundary::Periodic;
    c.coefficients.p = 2.0;
    c.coefficients.c_flory = 0.0;
    c.coefficients.nu_ref = nu;
    c.coefficients.nu_inf = 0.0;
    c.initial.velocity = VelocityInit::TaylorGreen { amplitude: 1.0 };
    c.initial.phi0 = 0.0;
    c.initial.psi_height = 0.0;
    c.time.t_final = 2.0;
    c.time.dt_max = 0.01;

    let s = run(&c, None)?;
    let ke0 = s.first.kinetic;
    for r in s.series.iter().step_by(40) {
        let exact = ke0 * (-2.0 * nu * r.t).exp();
        println!(
            "t {:6.3}  KE {:.8}  exact {:.8}  residual {:+.2e}",
            r.t, r.kinetic, exact, r.energy_residual
        );
    }
    println!("{} steps, max divergence {:.1e}", s.steps, s.max_divergence);
    Ok(())
}

//! Steps a coupled simulation by hand and prints the total mass budget
//! (monomers plus polymer mass) after each step.

use polyflow::coupling::{RunConfig, Simulation};

fn main() -> polyflow::Result<()> {
    let mut c = RunConfig::default();
    c.grid.nx = 24;
    c.grid.ny = 24;
    c.grid.nr = 96;
    let mut sim = Simulation::new(c)?;
    let m0 = sim.initial_mass();
    println!("initial mass {m0:.12}");
    while sim.state.t < 0.5 {
        let r = sim.advance(0.5 - sim.state.t)?;
        if r.step % 5 == 0 {
            println!(
                "step {:4} t {:.4} mass {:.12} drift {:+.2e} phi [{:.4}, {:.4}]",
                r.step, r.t, r.total_mass, r.mass_drift, r.phi_min, r.phi_max
            );
        }
    }
    Ok(())
}

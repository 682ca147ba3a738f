//! Spatially homogeneous polymerization-fragmentation with a constant
//! polymerization rate. Prints the monomer level and the first two moments.

use polyflow::model::ModelCoefficients;
use polyflow::zero_dim::{run_zero_dim, ZeroDimConfig};

fn main() -> polyflow::Result<()> {
    let cfg = ZeroDimConfig {
        sample_every: 500,
        ..Default::default()
    };
    let coeffs = ModelCoefficients::default();
    let tr = run_zero_dim(&cfg, &coeffs)?;
    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>14}",
        "t", "phi", "M0", "M1", "total mass"
    );
    for s in &tr.samples {
        println!(
            "{:8.3} {:12.6e} {:12.6e} {:12.6e} {:14.10}",
            s.t, s.phi, s.m0, s.m1, s.mass
        );
    }
    println!("{} RK4 steps, max relative mass drift {:.3e}", tr.steps, tr.max_drift());
    Ok(())
}

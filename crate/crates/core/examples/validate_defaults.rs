//! Structural assumption check of the default coefficients and of a
//! coefficient set whose polymerization rate does not vanish at `r0`.

use std::sync::Arc;

use polyflow::model::{validate_coefficients, ModelCoefficients, SampleSpec};

fn main() -> polyflow::Result<()> {
    let spec = SampleSpec::default();
    let defaults = ModelCoefficients::default();
    print!("{}", validate_coefficients(&defaults, &spec)?);

    let mut bad = defaults.clone();
    bad.tau = Arc::new(|_| 1.0);
    bad.tau_prime = Arc::new(|_| 0.0);
    let rep = validate_coefficients(&bad, &spec)?;
    println!("constant tau fails {:?}", rep.failed());
    Ok(())
}

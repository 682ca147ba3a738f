//! Tabulates both built-in viscosity closures over chain length and shear.

use polyflow::model::{ClosureKind, CoefficientParams, ViscosityClosure};

fn main() -> polyflow::Result<()> {
    for kind in [ClosureKind::PowerLawFlory, ClosureKind::Crossover] {
        let params = CoefficientParams {
            closure: kind,
            ..Default::default()
        };
        let nu = ViscosityClosure::from_params(&params);
        println!("{kind:?} (p = {})", params.p);
        print!("{:>8}", "psi~\\|D|");
        let shears = [0.0, 0.5, 1.0, 4.0, 16.0];
        for s in shears {
            print!("{s:>11}");
        }
        println!();
        for psi in [0.0, 1.0, 5.0, 20.0] {
            print!("{psi:>8}");
            for s in shears {
                print!("{:>11.4}", nu.eval(psi, s)?);
            }
            println!();
        }
    }
    Ok(())
}

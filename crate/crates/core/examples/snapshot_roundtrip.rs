//! Writes a snapshot of an initialized simulation, reads it back and
//! compares the polymer field.

use polyflow::coupling::{RunConfig, Simulation};
use polyflow::io::Snapshot;

fn main() -> polyflow::Result<()> {
    let mut c = RunConfig::default();
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.grid.nr = 64;
    let sim = Simulation::new(c)?;
    let snap = sim.snapshot();
    let path = std::env::temp_dir().join("polyflow_example.pflow");
    snap.write(&path)?;
    let back = Snapshot::read(&path)?;
    let same = back.field("psi") == snap.field("psi");
    println!(
        "wrote {} ({} bytes), fields identical: {same}",
        path.display(),
        std::fs::metadata(&path)?.len()
    );
    for (name, data) in &back.fields {
        println!("  {name}: {} values", data.len());
    }
    std::fs::remove_file(&path)?;
    Ok(())
}

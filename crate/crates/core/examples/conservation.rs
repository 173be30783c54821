//! Nonlinear magnetic evolution in 1D with mass and energy tracking.

use magscat::propagate::{conservation_series, relative_drift, EvolutionSpec, HamiltonianOp};
use magscat::{build_potentials, make_grid, Bump, Component, PotentialDescriptor, Wavefunction};

fn main() -> magscat::Result<()> {
    let g = make_grid(1, 1024, 40.0)?;
    let desc = PotentialDescriptor::new(vec![
        Bump::new(Component::A1, &[0.0], 0.5, &[1.0]),
        Bump::new(Component::V, &[1.0], 0.3, &[0.7]),
    ]);
    let ham = HamiltonianOp::new(&build_potentials(&desc, &g)?);
    let u0 = Wavefunction::gaussian(&g, &[-5.0], 1.0, &[1.0], 1.0);
    let spec = EvolutionSpec::nonlinear(1e-3, 3.0).with_time(5.0);

    let rows = conservation_series(&u0, &ham, &spec, 500)?;
    for (t, c) in rows.iter().step_by(2) {
        println!("t = {t:5.2}  mass = {:.14}  energy = {:.12}", c.mass, c.energy);
    }
    let (mass, energy) = relative_drift(&rows);
    println!("relative drift: mass {mass:.2e}, energy {energy:.2e}");
    Ok(())
}

//! Linear and nonlinear scattering of a packet crossing a magnetic bump in 2D.

use magscat::propagate::{EvolutionSpec, HamiltonianOp};
use magscat::scattering::{auto_t_scat, linear_s, nonlinear_s, nonlinear_s_inverse, ScatterMode, ScatterSpec};
use magscat::{build_potentials, make_grid, Bump, Component, PotentialDescriptor, Wavefunction};

fn main() -> magscat::Result<()> {
    let g = make_grid(2, 256, 16.0)?;
    let desc = PotentialDescriptor::new(vec![Bump::new(Component::A2, &[0.0, 0.0], 0.5, &[1.0, 1.0])]);
    let ham = HamiltonianOp::new(&build_potentials(&desc, &g)?);
    let phi = Wavefunction::gaussian(&g, &[-1.0, 0.0], 2.0, &[6.0, 0.0], 0.2);

    let t_scat = auto_t_scat(&phi, &ham, desc.effective_radius())?;
    println!("T_scat = {t_scat:.3}");
    let evo = EvolutionSpec::nonlinear(5e-3, 3.0);

    let lin = linear_s(&phi, &ham, &ScatterSpec::new(t_scat, evo.as_linear(), ScatterMode::Linear))?;
    let spec = ScatterSpec::new(t_scat, evo, ScatterMode::NonlinearVsFree);
    let nl = nonlinear_s(&phi, &ham, &spec)?;
    for (name, out) in [("linear", &lin), ("nonlinear", &nl)] {
        let d = &out.diagnostics;
        println!(
            "{name:>9}: |S phi - phi| = {:.4e}, mass {:.10} -> {:.10}, stability {:?}",
            out.output.sub(&phi)?.l2_norm(),
            d.mass_in,
            d.mass_out,
            d.stability
        );
    }
    let back = nonlinear_s_inverse(&nl.output, &ham, &spec)?;
    println!("round trip error {:.2e}", back.output.sub(&phi)?.l2_norm() / phi.l2_norm());
    Ok(())
}

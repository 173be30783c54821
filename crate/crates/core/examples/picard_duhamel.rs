//! Fixed-point solve of the scattering integral equation, compared with time stepping.

use num_complex::Complex64;

use magscat::picard::{picard_solve, PicardSpec};
use magscat::propagate::{EvolutionSpec, HamiltonianOp};
use magscat::scattering::{nonlinear_s, ScatterMode, ScatterSpec};
use magscat::{build_potentials, make_grid, Bump, Component, PotentialDescriptor, Wavefunction};

fn main() -> magscat::Result<()> {
    let g = make_grid(1, 256, 25.0)?;
    let desc = PotentialDescriptor::new(vec![Bump::new(Component::A1, &[0.0], 0.3, &[1.0])]);
    let ham = HamiltonianOp::new(&build_potentials(&desc, &g)?);
    let base = Wavefunction::gaussian(&g, &[0.0], 1.0, &[2.0], 1.0);
    let dt = 2e-3;

    for eps in [0.2, 0.05, 0.01] {
        let phi = base.scaled(Complex64::new(eps, 0.0));
        let res = picard_solve(&phi, &ham, &PicardSpec::new(1.0, dt, 3.0))?;
        let spec = ScatterSpec::new(1.0, EvolutionSpec::nonlinear(dt, 3.0), ScatterMode::NonlinearVsH).without_stability_check();
        let td = nonlinear_s(&phi, &ham, &spec)?;
        let gap = res.phi_plus.sub(&td.output)?.l2_norm() / phi.l2_norm();
        let first = res.ratios.first().copied().unwrap_or(f64::NAN);
        println!(
            "eps = {eps:<5} iterations {:>2}  first contraction ratio {first:.3e}  gap to time stepping {gap:.2e}",
            res.iterations
        );
    }
    Ok(())
}

//! Small-amplitude sweep: the nonlinear pairing tends to the linear one at order eps^{p-1}.

use magscat::amplitude::{default_ladder, fit_order, hermite_gaussian, sweep_pairs};
use magscat::propagate::{EvolutionSpec, HamiltonianOp};
use magscat::scattering::{auto_t_scat, linear_s, ScatterMode, ScatterSpec};
use magscat::{build_potentials, make_grid, Bump, Component, PotentialDescriptor, Wavefunction};

fn main() -> magscat::Result<()> {
    let g = make_grid(1, 1024, 40.0)?;
    let desc = PotentialDescriptor::new(vec![
        Bump::new(Component::A1, &[0.0], 0.5, &[1.0]),
        Bump::new(Component::V, &[0.0], 0.5, &[1.0]),
    ]);
    let ham = HamiltonianOp::new(&build_potentials(&desc, &g)?);
    let (centre, sigma, k0) = ([-1.0], 2.0, [6.0]);
    let phi = Wavefunction::gaussian(&g, &centre, sigma, &k0, 1.0);
    let psis: Vec<Wavefunction> = (0..3).map(|o| hermite_gaussian(&g, &centre, sigma, &k0, &[o])).collect();

    let t_scat = auto_t_scat(&phi, &ham, desc.effective_radius())?;
    let evo = EvolutionSpec::nonlinear(2e-3, 3.0);
    let lin = linear_s(&phi, &ham, &ScatterSpec::new(t_scat, evo.as_linear(), ScatterMode::Linear))?;
    let ladder = default_ladder(&phi, 0.05, 0.5, 5);
    let sweeps = sweep_pairs(&phi, &psis, &ham, &ladder, &ScatterSpec::new(t_scat, evo, ScatterMode::NonlinearVsFree))?;

    println!("ladder {ladder:?}");
    for (i, (psi, sw)) in psis.iter().zip(&sweeps).enumerate() {
        let reference = lin.output.inner(psi)?;
        let fit = fit_order(sw, reference)?;
        println!(
            "pair {i}: order {:.3}, extrapolated {:.6e} vs linear {:.6e}, relative error {:.2e}",
            fit.order, fit.extrapolated, reference, fit.relative_error
        );
    }
    Ok(())
}

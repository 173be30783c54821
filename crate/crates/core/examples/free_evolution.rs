//! Free Schrödinger flow: the exact Fourier multiplier against the split-step evolver,
//! plus the t^{-n/2} dispersive decay of the sup norm.

use magscat::propagate::{dispersive_decay, free_propagate, EvolutionSpec, Evolver, HamiltonianOp};
use magscat::{make_grid, Wavefunction};

fn main() -> magscat::Result<()> {
    let g = make_grid(2, 128, 20.0)?;
    let u0 = Wavefunction::gaussian(&g, &[-3.0, 0.0], 1.0, &[1.5, 0.5], 1.0);

    let exact = free_propagate(&u0, 2.0);
    let free = HamiltonianOp::free(&g);
    let mut u = u0.clone();
    Evolver::new(&free, EvolutionSpec::linear(1e-2))?.propagate(&mut u, 2.0)?;
    println!("multiplier vs evolver at t = 2: {:.2e}", exact.sub(&u)?.l2_norm());
    println!("mass before {:.12}, after {:.12}", u0.mass(), exact.mass());

    let wide = make_grid(2, 256, 40.0)?;
    let still = Wavefunction::gaussian(&wide, &[0.0, 0.0], 1.0, &[0.0, 0.0], 1.0);
    let fit = dispersive_decay(&still, &HamiltonianOp::free(&wide), 1e-2, &[2.0, 4.0, 8.0])?;
    println!("sup-norm decay exponent {:.3} (expect -1 in 2D)", fit.exponent);
    for (t, m) in &fit.samples {
        println!("  t = {t:4.1}  max |u| = {m:.5}");
    }
    Ok(())
}

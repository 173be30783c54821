//! High-velocity probes: pairings approach the smeared line integrals of A and V as |xi| grows.

use magscat::grid::make_grid;
use magscat::probe::{pairing, Medium, ProbeConfig, ProbeTarget};
use magscat::{Bump, Component, LineTarget, PotentialDescriptor};

fn main() -> magscat::Result<()> {
    let frame = make_grid(2, 64, 10.0)?;
    let cfg = ProbeConfig::new(1.0, 1e-3);
    let (theta, s) = (0.7, 0.3);

    let a = PotentialDescriptor::new(vec![Bump::new(Component::A2, &[0.2, -0.1], 0.02, &[1.0, 1.0])]);
    let v = PotentialDescriptor::new(vec![Bump::new(Component::V, &[0.2, -0.1], 0.3, &[1.0, 1.0])]);
    let cases = [
        ("A tangential", &a, ProbeTarget::ATangential, LineTarget::ATangential),
        ("V", &v, ProbeTarget::V, LineTarget::V),
    ];
    for (label, desc, target, line) in cases {
        let oracle = desc.smeared_line_integral(line, theta, s, cfg.sigma);
        println!("{label}: smeared line integral {oracle:.6e}");
        for speed in [8.0, 16.0, 32.0] {
            let medium = Medium::Comoving { desc, grid: &frame };
            let p = pairing(theta, s, speed, medium, target, &cfg, false)?;
            println!(
                "  |xi| = {speed:>4}: value {:.6e}  remainder {:.3e}  T = {:.3}",
                p.value,
                (p.value - oracle).norm(),
                p.t_scat
            );
        }
    }
    Ok(())
}

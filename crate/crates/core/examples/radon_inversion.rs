//! Ray transform and filtered backprojection of a two-bump V.

use magscat::tomography::{fbp_invert, uniform_angles, uniform_offsets, xray_forward, XrayField};
use magscat::{make_grid, Bump, Component, LineTarget, PotentialDescriptor};

fn main() -> magscat::Result<()> {
    let desc = PotentialDescriptor::new(vec![
        Bump::new(Component::V, &[0.8, 0.0], 1.0, &[0.7, 0.7]),
        Bump::new(Component::V, &[-0.5, 0.6], -0.6, &[1.0, 0.5]),
    ]);
    let g = make_grid(2, 96, 4.0)?;
    let truth = g.sample(|x| desc.v(x));
    let offsets = uniform_offsets(129, 6.0);
    for n in [8, 23, 45, 90, 180] {
        let sino = xray_forward(XrayField::Descriptor { desc: &desc, target: LineTarget::V }, &uniform_angles(n), &offsets)?;
        let e = fbp_invert(&sino, &g)?.errors_against(&truth)?;
        println!("{n:>4} angles: relative L2 {:.3e}, max abs {:.3e}", e.relative_l2, e.max_abs);
    }
    Ok(())
}

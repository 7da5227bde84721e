// Snapshot (BPOD-style) gramians as a quadrature with an embedded tableau.

use rkmor::analysis::{bpod_embedding, bpod_trajectory, snapshot_gramian};
use rkmor::bundled;
use rkmor::linalg::relative_difference;
use rkmor::system_model::GramianKind;
use rkmor::tableau::builtin;

pub fn run_example() -> rkmor::Result<()> {
    let sys = bundled::diffusion(20);
    let steps = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2];
    // trapezoidal-like weights on the snapshot times
    let deltas = [1.5e-3, 3.5e-3, 7.5e-3, 1.5e-2, 1e-2];
    for name in ["backward-euler", "gauss-legendre-2"] {
        let t = builtin(name)?;
        let z = bpod_embedding(&sys, GramianKind::Controllability, &t, &steps, &deltas)?;
        let direct = snapshot_gramian(&bpod_trajectory(&sys, GramianKind::Controllability, &t, &steps)?, &deltas);
        println!("{name}: {} columns, difference to snapshot sum {:.1e}", z.k(), relative_difference(&z.gramian(), &direct));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

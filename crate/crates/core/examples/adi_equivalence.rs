// Low-rank ADI with parameters α equals one step of the DIRK method with
// diagonal -1/α.

use rkmor::analysis::compare_adi;
use rkmor::bundled;
use rkmor::linalg::c;
use rkmor::system_model::GramianKind;
use rkmor::tableau::{check_adi_condition, dirk_from_adi_params};

pub fn run_example() -> rkmor::Result<()> {
    let sys = bundled::random_stable(30, 7);
    let alphas = [c(-0.5, 0.0), c(-2.0, 1.5), c(-2.0, -1.5), c(-8.0, 0.0)];
    for kind in [GramianKind::Controllability, GramianKind::Observability] {
        let cmp = compare_adi(&sys, kind, &alphas)?;
        println!("{kind:?}: {} columns, relative difference {:.2e}", cmp.adi.k(), cmp.relative_difference);
    }
    let mu: Vec<_> = alphas.iter().map(|a| -c(1.0, 0.0) / a).collect();
    let dirk = dirk_from_adi_params(&mu)?;
    println!("ADI condition residual of the DIRK tableau: {:.1e}", check_adi_condition(&dirk).residual());
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

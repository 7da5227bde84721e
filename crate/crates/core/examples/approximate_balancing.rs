// Reduce the 1-D diffusion system with backward Euler factors on both
// sides and check moment matching at the predicted points.

use rkmor::analysis::verify_interpolation;
use rkmor::balancer::{approximate_balance, exact_balanced_truncation, Truncation};
use rkmor::bundled;
use rkmor::gramian_quadrature::run_quadrature;
use rkmor::linalg::c;
use rkmor::system_model::{transfer_function, GramianKind};
use rkmor::tableau::{builtin, predict_expansion_points};

pub fn run_example() -> rkmor::Result<()> {
    let sys = bundled::diffusion(100);
    let be = builtin("backward-euler")?;
    let (steps_c, steps_o) = ([0.01, 0.03, 0.1, 0.3], [0.02, 0.05, 0.2, 0.5]);

    let z_c = run_quadrature(&sys, GramianKind::Controllability, &be, &steps_c)?;
    let z_o = run_quadrature(&sys, GramianKind::Observability, &be, &steps_o)?;
    let res = approximate_balance(&sys, &z_c, &z_o, Truncation::FullRank)?;
    let sigma: Vec<String> = res.sigma.iter().map(|x| format!("{x:.2e}")).collect();
    println!("r = {}, sigma = [{}], |WᴴV - I| = {:.1e}", res.r, sigma.join(", "), res.biorthogonality_defect());

    let points = predict_expansion_points(&be, &steps_c, &be, &steps_o);
    let report = verify_interpolation(&sys, &res, &points, 1e-6)?;
    print!("{}", report.to_table());

    // compare against dense balanced truncation of the same order
    let exact = exact_balanced_truncation(&sys, res.r)?;
    for w in [0.1, 10.0, 1000.0] {
        let s = c(0.0, w);
        let g = transfer_function(&sys, s)?;
        println!(
            "|G - G_approx| = {:.2e}, |G - G_bt| = {:.2e} at s = {w}i",
            (g - transfer_function(&res.reduced, s)?).norm(),
            (g - transfer_function(&exact.reduced, s)?).norm()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

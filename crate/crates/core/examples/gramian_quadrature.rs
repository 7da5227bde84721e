// Low-rank controllability gramian of the diagonal test system by the
// implicit midpoint rule, compared with the dense Lyapunov solution.

use rkmor::bundled;
use rkmor::gramian_quadrature::{log_spaced_steps, run_quadrature};
use rkmor::linalg::{complexify, relative_difference};
use rkmor::system_model::{solve_lyapunov_dense, GramianKind};
use rkmor::tableau::builtin;

pub fn run_example() -> rkmor::Result<()> {
    let sys = bundled::diagonal(20);
    let p = complexify(&solve_lyapunov_dense(&sys, GramianKind::Controllability)?);
    let midpoint = builtin("implicit-midpoint")?;
    for n in [5, 10, 25, 50] {
        let z = run_quadrature(&sys, GramianKind::Controllability, &midpoint, &log_spaced_steps(n, 1e-2, 1e2))?;
        println!("N = {n:3}: {} columns, relative error {:.2e}", z.k(), relative_difference(&z.gramian(), &p));
    }

    // Gauss-Legendre gives two complex columns per step
    let z = run_quadrature(&sys, GramianKind::Controllability, &builtin("gl2")?, &log_spaced_steps(10, 1e-2, 1e2))?;
    println!("gauss-legendre-2, N = 10: relative error {:.2e}", relative_difference(&z.gramian(), &p));
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

// The factor's column span depends only on the tableau eigenvalues (and
// their Jordan structure across steps).

use rkmor::analysis::verify_span;
use rkmor::bundled;
use rkmor::gramian_quadrature::run_quadrature;
use rkmor::system_model::GramianKind;
use rkmor::tableau::builtin;

pub fn run_example() -> rkmor::Result<()> {
    let sys = bundled::random_stable(50, 3);
    let cases: [(&str, &[f64]); 4] = [
        ("gauss-legendre-2", &[1.0]),
        ("radau-ia-2", &[0.3, 0.9, 2.1]),
        ("explicit-euler", &[0.2, 0.4, 0.6]),
        ("backward-euler", &[1.0, 1.0]),
    ];
    for (name, steps) in cases {
        let t = builtin(name)?;
        let z = run_quadrature(&sys, GramianKind::Controllability, &t, steps)?;
        let rep = verify_span(&z, &sys, &t, steps)?;
        let jordan: Vec<String> = rep.jordan.iter().map(|j| format!("{:.3}:{:?}", j.eigenvalue, j.blocks)).collect();
        println!(
            "{name} {steps:?}: angle {:.1e}, rank {} / {}, observable {:?}, jordan {}",
            rep.containment_angle,
            rep.factor_rank,
            rep.reference_dim,
            rep.observable,
            jordan.join(" ")
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

// A user-supplied tableau in JSON: the two-stage Lobatto IIIC method.

use rkmor::bundled;
use rkmor::gramian_quadrature::run_quadrature;
use rkmor::system_model::GramianKind;
use rkmor::tableau::{check_adi_condition, predict_expansion_points, ButcherTableau, TableauJson};

const LOBATTO_IIIC: &str = r#"{
  "s": 2,
  "lambda": [[0.5, -0.5], [0.5, 0.5]],
  "beta": [0.5, 0.5],
  "gamma": [0.0, 1.0]
}"#;

pub fn run_example() -> rkmor::Result<()> {
    let json: TableauJson = serde_json::from_str(LOBATTO_IIIC)?;
    let t = ButcherTableau::from_json(&json)?;
    for mu in t.eigenvalues() {
        println!("eigenvalue {:.4}{:+.4}i", mu.re, mu.im);
    }
    println!("ADI condition residual {:.3}", check_adi_condition(&t).residual());

    let sys = bundled::diagonal(20);
    let z = run_quadrature(&sys, GramianKind::Controllability, &t, &[0.5, 2.0])?;
    println!("{} columns", z.k());
    print!("{}", predict_expansion_points(&t, &[0.5, 2.0], &t, &[1.0]).to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

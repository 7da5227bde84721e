// Transfer function, moments and Markov parameters of a small system.

use nalgebra::{DMatrix, DVector};
use rkmor::linalg::c;
use rkmor::system_model::{markov_parameters, moments, transfer_function, LtiSystem};

pub fn run_example() -> rkmor::Result<()> {
    let sys = LtiSystem::from_dense(
        DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]),
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![1.0, 1.0]),
    )?;
    sys.assert_stable()?;

    for s in [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)] {
        println!("G({s}) = {:.6}", transfer_function(&sys, s)?);
    }
    let m = moments(&sys, c(1.0, 0.0), 3)?;
    println!("moments at 1: {:.6} {:.6} {:.6}", m[0].re, m[1].re, m[2].re);
    let markov = markov_parameters(&sys, 4);
    println!("Markov parameters: {:?}", markov.iter().map(|z| z.re).collect::<Vec<_>>());
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

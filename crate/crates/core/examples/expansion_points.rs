// Interpolation points predicted for Gauss-Legendre (input side) and
// Radau IA (output side) with eight step sizes each.

use rkmor::tableau::{builtin, predict_expansion_points, PointLocation, Side};

pub fn run_example() -> rkmor::Result<()> {
    let steps: Vec<f64> = (3..=10).map(|k| k as f64 / 10.0).collect();
    let set = predict_expansion_points(&builtin("gauss-legendre-2")?, &steps, &builtin("radau-ia-2")?, &steps);

    // ω⁻¹(3 ∓ √3i) on the input side, τ⁻¹(2 ∓ √2i) on the output side
    for side in [Side::Input, Side::Output] {
        let pts: Vec<String> = set
            .side(side)
            .filter_map(|p| match p.location {
                PointLocation::Finite(z) => Some(format!("{:.3}{:+.3}i", z.re, z.im)),
                PointLocation::Infinity => None,
            })
            .collect();
        println!("{side}: {}", pts.join(" "));
    }
    assert_eq!(set.finite_count(), 32);
    print!("{}", set.to_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> rkmor::Result<()> {
    run_example()
}

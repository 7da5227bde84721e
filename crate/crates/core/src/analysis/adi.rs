use crate::error::{Error, Result};
use crate::gramian_quadrature::{run_quadrature, LowRankFactor};
use crate::linalg::{complexify_vec, relative_difference, CMat, C64};
use crate::shifted_solver::Factorization;
use crate::system_model::{GramianKind, LtiSystem};
use crate::tableau::dirk_from_adi_params;

/// Low-rank ADI for AP + PAᴴ + BBᵀ = 0 (or the dual) with parameters α_i,
/// Re α_i < 0, complex shifts handled in complex arithmetic.
pub fn adi_iteration(sys: &LtiSystem, kind: GramianKind, alphas: &[C64]) -> Result<LowRankFactor> {
    if let Some(&bad) = alphas.iter().find(|a| !(a.re < 0.0)) {
        return Err(Error::InvalidAdiShift(bad));
    }
    let a = sys.operator(kind);
    let n = sys.n();
    let mut z = CMat::zeros(n, alphas.len());
    let mut v = complexify_vec(sys.start_vector(kind));
    for (i, &alpha) in alphas.iter().enumerate() {
        // (A + αI)^{-1}
        let f = Factorization::shifted(&a, alpha, C64::new(-1.0, 0.0)).ok_or(Error::SingularShift(-alpha))?;
        v = if i == 0 {
            f.solve_vec(&v)
        } else {
            let coef = alpha + alphas[i - 1].conj();
            &v - f.solve_vec(&v) * coef
        };
        z.set_column(i, &(&v * C64::new((-2.0 * alpha.re).sqrt(), 0.0)));
    }
    Ok(LowRankFactor { z, kind, shifts: alphas.iter().map(|a| -C64::new(1.0, 0.0) / a).collect(), steps: vec![1.0] })
}

#[derive(Debug, Clone)]
pub struct AdiComparison {
    pub adi: LowRankFactor,
    pub quadrature: LowRankFactor,
    /// ‖Z_ADI Z_ADIᴴ - Z_RK Z_RKᴴ‖_F / ‖Z_RK Z_RKᴴ‖_F
    pub relative_difference: f64,
}

/// Runs ADI with α_i and one step (ω = 1) of the DIRK tableau with
/// μ_i = -1/α_i, and compares the gramian approximations.
pub fn compare_adi(sys: &LtiSystem, kind: GramianKind, alphas: &[C64]) -> Result<AdiComparison> {
    let adi = adi_iteration(sys, kind, alphas)?;
    let mu: Vec<C64> = alphas.iter().map(|a| -C64::new(1.0, 0.0) / a).collect();
    let t = dirk_from_adi_params(&mu)?;
    let quadrature = run_quadrature(sys, kind, &t, &[1.0])?;
    let relative_difference = relative_difference(&adi.gramian(), &quadrature.gramian());
    Ok(AdiComparison { adi, quadrature, relative_difference })
}

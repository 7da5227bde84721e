use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gramian_quadrature::{quadrature_step_weighted, stage_solve_kron, PreparedTableau, QuadratureOptions, QuadratureState};
use crate::gramian_quadrature::LowRankFactor;
use crate::linalg::{complexify_vec, CMat, CVec, C64};
use crate::shifted_solver::ShiftedSolver;
use crate::system_model::{GramianKind, LtiSystem};
use crate::tableau::{validate_steps, ButcherTableau};

/// The (s+1)-stage tableau Λ = [[Λ_h, 0], [β_hᵀ, 0]], β = [β_h; 0] whose last
/// stage reproduces the new state; β̃ = [0; δ/ω] keeps only that stage.
pub fn bpod_tableau(t_h: &ButcherTableau, omega: f64, delta: f64) -> Result<ButcherTableau> {
    let s = t_h.stages();
    let mut lambda = CMat::zeros(s + 1, s + 1);
    lambda.view_mut((0, 0), (s, s)).copy_from(t_h.lambda());
    for l in 0..s {
        lambda[(s, l)] = t_h.beta()[l];
    }
    let beta = CVec::from_iterator(s + 1, t_h.beta().iter().copied().chain(std::iter::once(C64::new(0.0, 0.0))));
    let mut beta_tilde = DVector::zeros(s + 1);
    beta_tilde[s] = delta / omega;
    let gamma = DVector::from_iterator(s + 1, t_h.gamma().iter().copied().chain(std::iter::once(1.0)));
    ButcherTableau::new(lambda, beta, beta_tilde, gamma)
}

/// Quadrature with the embedded tableau; ZZᴴ equals Σ δ_j h_j h_jᴴ.
pub fn bpod_embedding(sys: &LtiSystem, kind: GramianKind, t_h: &ButcherTableau, steps: &[f64], deltas: &[f64]) -> Result<LowRankFactor> {
    validate_steps(steps)?;
    if deltas.len() != steps.len() {
        return Err(Error::DimensionMismatch(format!("{} quadrature weights for {} steps", deltas.len(), steps.len())));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::InvalidArgument(format!("quadrature weight {d} is negative")));
    }
    let solver = ShiftedSolver::new(sys.operator(kind));
    let prepared = PreparedTableau::new(&bpod_tableau(t_h, 1.0, 0.0)?);
    let opts = QuadratureOptions::default();
    let mut state = QuadratureState::initial(sys, kind);
    for (&omega, &delta) in steps.iter().zip(deltas) {
        let mut weights = DVector::zeros(t_h.stages() + 1);
        weights[t_h.stages()] = delta / omega;
        state = quadrature_step_weighted(&solver, &state, &prepared, omega, &weights, &opts)?;
    }
    Ok(state.z)
}

/// States h_1..h_N of the plain Runge-Kutta trajectory of ḣ = Ah, h_0 = B
/// (or Cᵀ), with stage values from the vectorized stage system.
pub fn bpod_trajectory(sys: &LtiSystem, kind: GramianKind, t: &ButcherTableau, steps: &[f64]) -> Result<Vec<CVec>> {
    validate_steps(steps)?;
    let a = sys.operator(kind);
    let mut h = complexify_vec(sys.start_vector(kind));
    let mut out = Vec::with_capacity(steps.len());
    for &omega in steps {
        let stages = stage_solve_kron(&a, &h, t, omega)?;
        h += a.apply(&(&stages * t.beta())) * C64::new(omega, 0.0);
        out.push(h.clone());
    }
    Ok(out)
}

/// Σ δ_j h_j h_jᴴ
pub fn snapshot_gramian(snapshots: &[CVec], deltas: &[f64]) -> CMat {
    let n = snapshots.first().map_or(0, |h| h.len());
    snapshots.iter().zip(deltas).fold(CMat::zeros(n, n), |acc, (h, &d)| acc + h * h.adjoint() * C64::new(d, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian_quadrature::run_quadrature;
    use crate::linalg::{complexify, relative_difference};
    use crate::tableau::builtin;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stable(n: usize, seed: u64) -> LtiSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = (&g - g.transpose()) * 0.5 - DMatrix::identity(n, n) - &g * g.transpose() / (n as f64);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let cv = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        LtiSystem::from_dense(a, b, cv).unwrap()
    }

    const STEPS: [f64; 4] = [0.1, 0.25, 0.5, 0.8];

    #[test]
    fn backward_euler_weights_equal_step_sizes() {
        let sys = random_stable(8, 41);
        let be = builtin("backward-euler").unwrap();
        let emb = bpod_embedding(&sys, GramianKind::Controllability, &be, &STEPS, &STEPS).unwrap();
        let direct = run_quadrature(&sys, GramianKind::Controllability, &be, &STEPS).unwrap();
        assert!(relative_difference(&emb.gramian(), &direct.gramian()) <= 1e-10);
        assert_eq!(emb.k(), STEPS.len());
    }

    #[test]
    fn explicit_euler_recurrence() {
        let sys = random_stable(8, 42);
        let ad = complexify(&sys.a().to_dense());
        let deltas = [0.3, 0.0, 1.2, 0.7];
        let mut h = complexify_vec(sys.b());
        let mut expected = CMat::zeros(8, 8);
        for (&w, &d) in STEPS.iter().zip(&deltas) {
            h = &h + &ad * &h * C64::new(w, 0.0);
            expected += &h * h.adjoint() * C64::new(d, 0.0);
        }
        let emb = bpod_embedding(&sys, GramianKind::Controllability, &builtin("explicit-euler").unwrap(), &STEPS, &deltas).unwrap();
        assert!(relative_difference(&emb.gramian(), &expected) <= 1e-10);
        assert_eq!(emb.k(), 3);
    }

    #[test]
    fn gauss_legendre_stability_function() {
        let sys = random_stable(6, 43);
        let ad = complexify(&sys.a().to_dense());
        let id = CMat::identity(6, 6);
        let traj = bpod_trajectory(&sys, GramianKind::Controllability, &builtin("gl2").unwrap(), &STEPS).unwrap();
        let mut h = complexify_vec(sys.b());
        for (&w, got) in STEPS.iter().zip(&traj) {
            let z = &ad * C64::new(w, 0.0);
            let z2 = &z * &z / C64::new(12.0, 0.0);
            let num = &id + &z / C64::new(2.0, 0.0) + &z2;
            let den = &id - &z / C64::new(2.0, 0.0) + &z2;
            h = den.lu().solve(&(num * &h)).unwrap();
            assert!((got - &h).norm() <= 1e-12 * h.norm());
        }
    }

    #[test]
    fn embedding_matches_snapshots() {
        let sys = random_stable(10, 44);
        let deltas = [0.5, 0.1, 0.9, 0.3];
        for name in ["backward-euler", "gl2"] {
            let t = builtin(name).unwrap();
            let emb = bpod_embedding(&sys, GramianKind::Observability, &t, &STEPS, &deltas).unwrap();
            let direct = snapshot_gramian(&bpod_trajectory(&sys, GramianKind::Observability, &t, &STEPS).unwrap(), &deltas);
            assert!(relative_difference(&emb.gramian(), &direct) <= 1e-10, "{name}");
        }
    }

    #[test]
    fn zero_weights_give_zero_factor() {
        let sys = random_stable(5, 45);
        let emb = bpod_embedding(&sys, GramianKind::Controllability, &builtin("gl2").unwrap(), &STEPS, &[0.0; 4]).unwrap();
        assert_eq!(emb.k(), 0);
        assert!(emb.gramian().norm() == 0.0);
    }
}

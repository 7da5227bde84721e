use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::gramian_quadrature::LowRankFactor;
use crate::json;
use crate::linalg::{self, complexify, complexify_vec, CMat, CVec, C64};
use crate::shifted_solver::ShiftedSolver;
use crate::system_model::LtiSystem;
use crate::tableau::{assemble_composite, ButcherTableau, CompositeTableau, POINT_MERGE_TOL};

const JORDAN_RANK_TOL: f64 = 1e-10;
/// Composite sizes above this are not tested for observability.
pub const OBSERVABILITY_CAP: usize = 200;
const SPAN_RANK_TOL: f64 = 1e-12;

/// Jordan block sizes (largest first) of one eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanBlocks {
    #[serde(with = "json::complex")]
    pub eigenvalue: C64,
    pub blocks: Vec<usize>,
}

impl JordanBlocks {
    pub fn algebraic_multiplicity(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn largest(&self) -> usize {
        self.blocks.first().copied().unwrap_or(0)
    }
}

fn cluster(eigs: &[C64]) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &z in eigs {
        match out.iter_mut().find(|(p, _)| (*p - z).norm() <= POINT_MERGE_TOL * p.norm().max(1.0)) {
            Some(e) => e.1 += 1,
            None => out.push((z, 1)),
        }
    }
    out
}

/// Jordan structure of `m` at the given eigenvalues (repeats allowed), from
/// the ranks of (m - μI)^k.
pub fn jordan_structure(m: &CMat, eigenvalues: &[C64]) -> Vec<JordanBlocks> {
    let n = m.nrows();
    let norm = linalg::spectral_norm(m).max(1.0);
    cluster(eigenvalues)
        .into_iter()
        .map(|(mu, alg)| {
            let shifted = m - CMat::identity(n, n) * mu;
            let scale = norm + mu.norm();
            // ranks[k] = rank((m - μI)^k)
            let mut ranks = vec![n];
            let mut power = CMat::identity(n, n);
            for k in 1..=alg {
                power = &shifted * power;
                let sv = power.singular_values();
                ranks.push(sv.iter().filter(|&&s| s > JORDAN_RANK_TOL * scale.powi(k as i32)).count());
            }
            // blocks of size ≥ k: ranks[k-1] - ranks[k]
            let at_least: Vec<usize> = (1..=alg).map(|k| ranks[k - 1].saturating_sub(ranks[k])).collect();
            let mut blocks = Vec::new();
            for k in (1..=alg).rev() {
                let exact = at_least[k - 1] - at_least.get(k).copied().unwrap_or(0);
                blocks.extend(std::iter::repeat_n(k, exact));
            }
            JordanBlocks { eigenvalue: mu, blocks }
        })
        .collect()
}

/// PBH test of the pair (hat-Λᵀ, 𝟙ᵀ); `None` above [`OBSERVABILITY_CAP`].
pub fn composite_observable(composite: &CompositeTableau, eigenvalues: &[C64]) -> Option<bool> {
    let m = &composite.lambda_hat_t;
    let ns = m.nrows();
    if ns > OBSERVABILITY_CAP {
        return None;
    }
    let tol = JORDAN_RANK_TOL * linalg::spectral_norm(m).max(1.0);
    Some(cluster(eigenvalues).iter().all(|&(mu, _)| {
        let mut stacked = CMat::zeros(ns + 1, ns);
        stacked.view_mut((0, 0), (ns, ns)).copy_from(&(m - CMat::identity(ns, ns) * mu));
        stacked.row_mut(ns).fill(C64::new(1.0, 0.0));
        stacked.singular_values().min() > tol
    }))
}

/// Rational Krylov reference basis: (I - μA)^{-i}b for i = 1..ℓ, or
/// A^{i}b for i = 0..ℓ-1 when μ = 0, ℓ the largest Jordan block of μ.
pub fn reference_basis(solver: &ShiftedSolver, b: &CVec, jordan: &[JordanBlocks]) -> Result<CMat> {
    let mut cols = Vec::new();
    for jb in jordan {
        let mut v = b.clone();
        if jb.eigenvalue.norm() <= POINT_MERGE_TOL {
            for i in 0..jb.largest() {
                if i > 0 {
                    v = solver.matrix().apply(&v);
                }
                cols.push(v.clone());
            }
        } else {
            for _ in 0..jb.largest() {
                v = solver.solve_vec(jb.eigenvalue, &v)?;
                cols.push(v.clone());
            }
        }
    }
    Ok(if cols.is_empty() { CMat::zeros(b.len(), 0) } else { CMat::from_columns(&cols) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    /// Largest principal angle between span(Z) and the reference basis.
    pub containment_angle: f64,
    pub dimension_match: bool,
    pub factor_rank: usize,
    pub reference_dim: usize,
    /// `None` when the composite is too large to test.
    pub observable: Option<bool>,
    pub positive_weights: bool,
    pub jordan: Vec<JordanBlocks>,
}

/// Compares span(Z) with the rational Krylov space predicted from the
/// eigenvalues and Jordan structure of the composite stage matrix.
pub fn verify_span(z: &LowRankFactor, sys: &LtiSystem, t: &ButcherTableau, steps: &[f64]) -> Result<SpanReport> {
    let composite = assemble_composite(t, steps)?;
    let eigs = composite.eigenvalues_by_block(t);
    let jordan = jordan_structure(&composite.lambda_hat(), &eigs);
    let observable = composite_observable(&composite, &eigs);
    let solver = ShiftedSolver::new(sys.operator(z.kind));
    let b = complexify_vec(sys.start_vector(z.kind));
    let reference = reference_basis(&solver, &b, &jordan)?;
    let factor_rank = linalg::orthonormal_basis(&z.z, SPAN_RANK_TOL).ncols();
    let reference_dim = linalg::orthonormal_basis(&reference, SPAN_RANK_TOL).ncols();
    Ok(SpanReport {
        containment_angle: linalg::max_principal_angle(&z.z, &reference, SPAN_RANK_TOL),
        dimension_match: factor_rank == reference_dim,
        factor_rank,
        reference_dim,
        observable,
        positive_weights: composite.beta_tilde_hat.iter().all(|&w| w > 0.0),
        jordan,
    })
}

/// Krylov basis [b, Ab, …, A^{k-1}b] of a dense matrix, for tests and examples.
pub fn krylov_basis(a: &nalgebra::DMatrix<f64>, b: &DVector<f64>, k: usize) -> CMat {
    let a = complexify(a);
    let mut v = complexify_vec(b);
    let mut cols = Vec::with_capacity(k);
    for _ in 0..k {
        cols.push(v.clone());
        v = &a * v;
    }
    CMat::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian_quadrature::run_quadrature;
    use crate::linalg::c;
    use crate::system_model::GramianKind;
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

    #[test]
    fn jordan_detection() {
        let nil = CMat::from_row_slice(3, 3, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.), c(2., 0.), c(0., 0.)]);
        let j = jordan_structure(&nil, &[c(0., 0.); 3]);
        assert_eq!(j[0].blocks, vec![3]);
        let diag = CMat::identity(2, 2);
        assert_eq!(jordan_structure(&diag, &[c(1., 0.); 2])[0].blocks, vec![1, 1]);
    }

    #[test]
    fn gauss_legendre_one_step() {
        let sys = random_stable(10, 31);
        let gl = builtin("gl2").unwrap();
        let z = run_quadrature(&sys, GramianKind::Controllability, &gl, &[1.0]).unwrap();
        let rep = verify_span(&z, &sys, &gl, &[1.0]).unwrap();
        assert!(rep.containment_angle <= 1e-8, "{rep:?}");
        assert!(rep.dimension_match && rep.factor_rank == 2);
        assert_eq!(rep.observable, Some(true));
    }

    #[test]
    fn explicit_euler_three_steps_is_krylov() {
        let sys = random_stable(10, 32);
        let ee = builtin("explicit-euler").unwrap();
        let steps = [0.2, 0.4, 0.6];
        let z = run_quadrature(&sys, GramianKind::Controllability, &ee, &steps).unwrap();
        let rep = verify_span(&z, &sys, &ee, &steps).unwrap();
        assert_eq!(rep.jordan.len(), 1);
        assert_eq!(rep.jordan[0].blocks, vec![3]);
        let k = krylov_basis(&sys.a().to_dense(), sys.b(), 3);
        assert!(linalg::max_principal_angle(&z.z, &k, 1e-12) <= 1e-8);
        assert!(rep.containment_angle <= 1e-8);
    }

    #[test]
    fn backward_euler_coinciding_steps() {
        let sys = random_stable(10, 33);
        let be = builtin("backward-euler").unwrap();
        let z = run_quadrature(&sys, GramianKind::Controllability, &be, &[1.0, 1.0]).unwrap();
        let rep = verify_span(&z, &sys, &be, &[1.0, 1.0]).unwrap();
        assert_eq!(rep.jordan[0].blocks, vec![2]);
        assert!(rep.containment_angle <= 1e-8 && rep.dimension_match);
    }
}

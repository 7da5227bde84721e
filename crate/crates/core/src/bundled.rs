//! Deterministic test systems.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::system_model::{LtiSystem, SystemMatrix};

pub const SIZES: [usize; 3] = [20, 100, 400];

/// A = diag(-1, …, -n), B = C = 𝟙.
pub fn diagonal(n: usize) -> LtiSystem {
    let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| -((i + 1) as f64)));
    LtiSystem::from_dense(a, DVector::from_element(n, 1.0), DVector::from_element(n, 1.0)).expect("consistent dimensions")
}

/// Central differences for u_t = u_xx on (0, 1) with Dirichlet ends, input
/// weight 1 - x and output weight h·x.
pub fn diffusion(n: usize) -> LtiSystem {
    let h = 1.0 / (n + 1) as f64;
    let k = ((n + 1) * (n + 1)) as f64;
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        trip.push((i, i, -2.0 * k));
        if i > 0 {
            trip.push((i, i - 1, k));
        }
        if i + 1 < n {
            trip.push((i, i + 1, k));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &trip);
    let x = DVector::from_fn(n, |i, _| (i + 1) as f64 * h);
    let b = x.map(|xi| 1.0 - xi);
    let c = x * h;
    LtiSystem::new(SystemMatrix::Sparse(a), b, c).expect("consistent dimensions")
}

/// A = (G - Gᵀ)/(2√n) - HHᵀ/n - I/2 with Gaussian G, H; B and C Gaussian.
/// The symmetric part is ≤ -I/2, so A is stable.
pub fn random_stable(n: usize, seed: u64) -> LtiSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize| DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let g = draw(n, n);
    let hm = draw(n, n);
    let b = draw(n, 1);
    let c = draw(n, 1);
    let sn = (n as f64).sqrt();
    let a = (&g - g.transpose()) / (2.0 * sn) - &hm * hm.transpose() / (n as f64) - DMatrix::identity(n, n) * 0.5;
    LtiSystem::from_dense(a, b.column(0).into_owned(), c.column(0).into_owned()).expect("consistent dimensions")
}

/// `diagonal-<n>`, `diffusion-<n>` (n ∈ 20/100/400) or `random-<n>`.
pub fn by_name(name: &str, seed: u64) -> Result<LtiSystem> {
    let unknown = || Error::InvalidArgument(format!("unknown bundled system '{name}' (diagonal-N, diffusion-N with N in 20/100/400, random-N)"));
    let (family, size) = name.rsplit_once('-').ok_or_else(unknown)?;
    let n: usize = size.parse().map_err(|_| unknown())?;
    match family {
        "diagonal" if SIZES.contains(&n) => Ok(diagonal(n)),
        "diffusion" if SIZES.contains(&n) => Ok(diffusion(n)),
        "random" if n > 0 => Ok(random_stable(n, seed)),
        _ => Err(unknown()),
    }
}

pub fn names() -> Vec<String> {
    let mut out: Vec<String> = SIZES.iter().flat_map(|n| [format!("diagonal-{n}"), format!("diffusion-{n}")]).collect();
    out.push("random-<n>".into());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_systems_are_stable() {
        for name in ["diagonal-20", "diffusion-20", "diffusion-100", "random-30"] {
            let sys = by_name(name, 7).unwrap();
            sys.assert_stable().unwrap();
        }
        assert!(by_name("diffusion-50", 0).is_err());
        assert!(by_name("nonsense", 0).is_err());
    }

    #[test]
    fn diffusion_is_sparse_tridiagonal() {
        let sys = diffusion(20);
        assert!(sys.a().is_sparse());
        let d = sys.a().to_dense();
        assert_eq!(d[(3, 3)], -2.0 * 441.0);
        assert_eq!(d[(3, 4)], 441.0);
        assert_eq!(d[(3, 5)], 0.0);
    }

    #[test]
    fn random_is_reproducible() {
        let a = random_stable(10, 3);
        let b = random_stable(10, 3);
        assert_eq!(a.a().to_dense(), b.a().to_dense());
        assert_ne!(random_stable(10, 4).b(), a.b());
    }
}

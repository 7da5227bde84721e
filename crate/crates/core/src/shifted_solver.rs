//! Families of shifted solves (I - σA)x = rhs with a factorization cache.

use std::sync::{Arc, Mutex};

use nalgebra::{Dyn, LU};

use crate::error::{Error, Result};
use crate::linalg::{complexify, CMat, CVec, C64};
use crate::sparse::BandedLu;
use crate::system_model::SystemMatrix;

pub const DEFAULT_CACHE_CAPACITY: usize = 32;
const SHIFT_MATCH_TOL: f64 = 1e-14;

/// A factorized square complex operator.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(LU<C64, Dyn, Dyn>),
    Banded(BandedLu),
}

impl Factorization {
    /// LU with partial pivoting; `None` when a pivot is numerically zero.
    pub fn dense(m: CMat) -> Option<Self> {
        let n = m.nrows();
        let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let lu = LU::new(m);
        let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
        if n > 0 && min_pivot <= (n as f64) * f64::EPSILON * scale {
            return None;
        }
        Some(Factorization::Dense(lu))
    }

    /// Factorization of σI - τA, banded for sparse A when the band is narrow.
    pub fn shifted(a: &SystemMatrix, sigma: C64, tau: C64) -> Option<Self> {
        match a {
            SystemMatrix::Sparse(csr) => match BandedLu::factor(csr, sigma, tau) {
                Some(lu) if lu.is_singular() => None,
                Some(lu) => Some(Factorization::Banded(lu)),
                None => Self::dense_shifted(&csr.to_dense(), sigma, tau),
            },
            SystemMatrix::Dense(m) => Self::dense_shifted(m, sigma, tau),
        }
    }

    fn dense_shifted(a: &nalgebra::DMatrix<f64>, sigma: C64, tau: C64) -> Option<Self> {
        let n = a.nrows();
        Self::dense(CMat::identity(n, n) * sigma - complexify(a) * tau)
    }

    pub fn solve(&self, rhs: &CMat) -> CMat {
        match self {
            Factorization::Dense(lu) => lu.solve(rhs).expect("nonsingular by construction"),
            Factorization::Banded(lu) => {
                let mut x = rhs.clone();
                lu.solve_in_place(&mut x);
                x
            }
        }
    }

    pub fn solve_vec(&self, rhs: &CVec) -> CVec {
        let m = CMat::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let x = self.solve(&m);
        CVec::from_column_slice(x.as_slice())
    }
}

/// Cache key: the shift σ of I - σA and a structural hash of A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftKey {
    pub shift: C64,
    pub matrix_hash: u64,
}

impl ShiftKey {
    pub fn matches(&self, other: &ShiftKey) -> bool {
        self.matrix_hash == other.matrix_hash
            && (self.shift - other.shift).norm() <= SHIFT_MATCH_TOL * self.shift.norm().max(other.shift.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub entries: usize,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Default)]
struct Cache {
    // most recently used last
    entries: Vec<(ShiftKey, Arc<Factorization>)>,
    hits: u64,
    misses: u64,
}

/// Shifted-system solver bound to one system matrix.
///
/// Thread safe: the cache sits behind a mutex that is released while
/// factorizing and solving.
#[derive(Debug)]
pub struct ShiftedSolver {
    a: Arc<SystemMatrix>,
    matrix_hash: u64,
    capacity: usize,
    conjugate_reuse: bool,
    cache: Mutex<Cache>,
}

impl ShiftedSolver {
    pub fn new(a: Arc<SystemMatrix>) -> Self {
        Self::with_capacity(a, DEFAULT_CACHE_CAPACITY)
    }

    pub fn with_capacity(a: Arc<SystemMatrix>, capacity: usize) -> Self {
        let matrix_hash = a.structural_hash();
        ShiftedSolver { a, matrix_hash, capacity: capacity.max(1), conjugate_reuse: true, cache: Mutex::new(Cache::default()) }
    }

    /// For real A, a factor of I - σ̄A is the conjugate of the factor of
    /// I - σA. When enabled, a cached conjugate shift serves the request.
    pub fn with_conjugate_reuse(mut self, enabled: bool) -> Self {
        self.conjugate_reuse = enabled;
        self
    }

    pub fn matrix(&self) -> &Arc<SystemMatrix> {
        &self.a
    }

    pub fn cache_stats(&self) -> CacheStats {
        let cache = self.cache.lock().unwrap();
        CacheStats { entries: cache.entries.len(), hits: cache.hits, misses: cache.misses }
    }

    fn lookup(&self, shift: C64) -> Result<(Arc<Factorization>, bool)> {
        let key = ShiftKey { shift, matrix_hash: self.matrix_hash };
        let conj_key = ShiftKey { shift: shift.conj(), matrix_hash: self.matrix_hash };
        {
            let mut cache = self.cache.lock().unwrap();
            let found = cache.entries.iter().position(|(k, _)| k.matches(&key)).map(|i| (i, false)).or_else(|| {
                if self.conjugate_reuse && shift.im != 0.0 {
                    cache.entries.iter().position(|(k, _)| k.matches(&conj_key)).map(|i| (i, true))
                } else {
                    None
                }
            });
            if let Some((i, conjugated)) = found {
                let entry = cache.entries.remove(i);
                let f = Arc::clone(&entry.1);
                cache.entries.push(entry);
                cache.hits += 1;
                return Ok((f, conjugated));
            }
            cache.misses += 1;
        }
        let f = Factorization::shifted(&self.a, C64::new(1.0, 0.0), shift)
            .ok_or(Error::SingularShiftedOperator { shift, stage: None })?;
        let f = Arc::new(f);
        let mut cache = self.cache.lock().unwrap();
        if cache.entries.len() >= self.capacity {
            cache.entries.remove(0);
        }
        cache.entries.push((key, Arc::clone(&f)));
        Ok((f, false))
    }

    /// Solves (I - shift·A)X = rhs. A zero shift returns `rhs` untouched.
    pub fn solve(&self, shift: C64, rhs: &CMat) -> Result<CMat> {
        if shift == C64::new(0.0, 0.0) {
            return Ok(rhs.clone());
        }
        let (f, conjugated) = self.lookup(shift)?;
        if conjugated {
            Ok(f.solve(&rhs.map(|z| z.conj())).map(|z| z.conj()))
        } else {
            Ok(f.solve(rhs))
        }
    }

    pub fn solve_vec(&self, shift: C64, rhs: &CVec) -> Result<CVec> {
        let m = CMat::from_column_slice(rhs.len(), 1, rhs.as_slice());
        Ok(CVec::from_column_slice(self.solve(shift, &m)?.as_slice()))
    }
}

/// One-off uncached solve of (I - shift·A)X = rhs.
pub fn solve_shifted(a: &SystemMatrix, shift: C64, rhs: &CMat) -> Result<CMat> {
    if shift == C64::new(0.0, 0.0) {
        return Ok(rhs.clone());
    }
    let f = Factorization::shifted(a, C64::new(1.0, 0.0), shift).ok_or(Error::SingularShiftedOperator { shift, stage: None })?;
    Ok(f.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::sparse::CsrMatrix;
    use nalgebra::{DMatrix, DVector};

    fn diag12() -> Arc<SystemMatrix> {
        Arc::new(SystemMatrix::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]))))
    }

    fn col(v: &[C64]) -> CMat {
        CMat::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn scalar_example() {
        let a = SystemMatrix::Dense(DMatrix::from_element(1, 1, -2.0));
        let x = solve_shifted(&a, c(0.5, 0.0), &col(&[c(1.0, 0.0)])).unwrap();
        assert!((x[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_shift_is_identity() {
        let rhs = col(&[c(1.0, 2.0), c(-3.0, 0.5)]);
        assert_eq!(solve_shifted(&diag12(), c(0.0, 0.0), &rhs).unwrap(), rhs);
    }

    #[test]
    fn diagonal_example() {
        let x = solve_shifted(&diag12(), c(1.0, 0.0), &col(&[c(1.0, 0.0), c(1.0, 0.0)])).unwrap();
        // elementwise 1/(1 - λ_i)
        assert!((x[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_operator_reported() {
        let a = SystemMatrix::Dense(DMatrix::from_element(1, 1, -2.0));
        let err = solve_shifted(&a, c(-0.5, 0.0), &col(&[c(1.0, 0.0)])).unwrap_err();
        assert!(matches!(err, Error::SingularShiftedOperator { .. }));
    }

    #[test]
    fn cache_counters() {
        let solver = ShiftedSolver::new(diag12());
        assert_eq!(solver.cache_stats(), CacheStats { entries: 0, hits: 0, misses: 0 });
        let rhs = col(&[c(1.0, 0.0), c(1.0, 0.0)]);
        solver.solve(c(0.7, 0.0), &rhs).unwrap();
        solver.solve(c(0.7, 0.0), &rhs).unwrap();
        assert_eq!(solver.cache_stats(), CacheStats { entries: 1, hits: 1, misses: 1 });

        let other = ShiftedSolver::new(diag12());
        other.solve(c(0.7, 0.0), &rhs).unwrap();
        other.solve(c(0.9, 0.1), &rhs).unwrap();
        assert_eq!(other.cache_stats(), CacheStats { entries: 2, hits: 0, misses: 2 });
    }

    #[test]
    fn lru_evicts_oldest() {
        let solver = ShiftedSolver::with_capacity(diag12(), 2);
        let rhs = col(&[c(1.0, 0.0), c(1.0, 0.0)]);
        for s in [0.1, 0.2, 0.1, 0.3] {
            solver.solve(c(s, 0.0), &rhs).unwrap();
        }
        // 0.2 was least recently used and is gone
        solver.solve(c(0.2, 0.0), &rhs).unwrap();
        let st = solver.cache_stats();
        assert_eq!(st.entries, 2);
        assert_eq!(st.misses, 4);
        assert_eq!(st.hits, 1);
    }

    #[test]
    fn conjugate_reuse_agrees_with_fresh_solve() {
        let a = Arc::new(SystemMatrix::Sparse(CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, -2.0), (0, 1, 1.0), (1, 0, 0.5), (1, 1, -3.0), (2, 1, 1.0), (2, 2, -1.0)],
        )));
        let rhs = col(&[c(1.0, 0.5), c(0.0, -1.0), c(2.0, 0.0)]);
        let s = c(0.4, 0.9);
        let solver = ShiftedSolver::new(Arc::clone(&a));
        solver.solve(s, &rhs).unwrap();
        let reused = solver.solve(s.conj(), &rhs).unwrap();
        assert_eq!(solver.cache_stats().hits, 1);
        let fresh = solve_shifted(&a, s.conj(), &rhs).unwrap();
        assert!((reused - fresh).norm() < 1e-14);
    }
}

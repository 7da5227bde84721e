//! LTI SISO systems, transfer-function evaluation, moments, Markov
//! parameters and the dense Lyapunov reference solver.

use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complexify, complexify_vec, CMat, CVec, C64};
use crate::matrix_market::{self, Layout};
use crate::shifted_solver::Factorization;
use crate::sparse::CsrMatrix;

/// Largest dimension for which dense eigenvalues of A are computed.
pub const EIGENVALUE_CAP: usize = 2000;
/// Largest dimension accepted by the dense Lyapunov solver.
pub const LYAPUNOV_CAP: usize = 200;
/// Largest dimension accepted by the explicit Kronecker Lyapunov solver.
pub const KRONECKER_LYAPUNOV_CAP: usize = 40;
/// Coordinate files below this fill ratio are stored sparse.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramianKind {
    Controllability,
    Observability,
}

/// The real system matrix A, dense or compressed-row.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl SystemMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SystemMatrix::Dense(m) => m.nrows(),
            SystemMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, SystemMatrix::Sparse(_))
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        match self {
            SystemMatrix::Dense(m) => {
                let mut out = CVec::zeros(m.nrows());
                for j in 0..m.ncols() {
                    let xj = x[j];
                    if xj == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..m.nrows() {
                        out[i] += xj * m[(i, j)];
                    }
                }
                out
            }
            SystemMatrix::Sparse(m) => m.mul_cvec(x),
        }
    }

    pub fn apply_mat(&self, x: &CMat) -> CMat {
        match self {
            SystemMatrix::Dense(m) => complexify(m) * x,
            SystemMatrix::Sparse(m) => m.mul_cmat(x),
        }
    }

    pub fn transpose(&self) -> SystemMatrix {
        match self {
            SystemMatrix::Dense(m) => SystemMatrix::Dense(m.transpose()),
            SystemMatrix::Sparse(m) => SystemMatrix::Sparse(m.transpose()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SystemMatrix::Dense(m) => m.clone(),
            SystemMatrix::Sparse(m) => m.to_dense(),
        }
    }

    /// Hash over the dimension and the exact entry bits.
    pub fn structural_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim().hash(&mut h);
        match self {
            SystemMatrix::Dense(m) => {
                0u8.hash(&mut h);
                for v in m.iter() {
                    v.to_bits().hash(&mut h);
                }
            }
            SystemMatrix::Sparse(m) => {
                1u8.hash(&mut h);
                for (i, j, v) in m.triplets() {
                    (i, j, v.to_bits()).hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Eigenvalues by a dense real Schur decomposition.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let n = self.dim();
        if n > EIGENVALUE_CAP {
            return Err(Error::OracleTooLarge { size: n, cap: EIGENVALUE_CAP });
        }
        Ok(self.to_dense().complex_eigenvalues().iter().copied().collect())
    }
}

/// Stable SISO system dx/dt = Ax + Bu, y = Cx with real data.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    a: Arc<SystemMatrix>,
    a_t: OnceLock<Arc<SystemMatrix>>,
    b: DVector<f64>,
    c: DVector<f64>,
    eigenvalues: OnceLock<Vec<C64>>,
}

impl LtiSystem {
    /// `c` is the output row stored as a vector. Stability is not checked here.
    pub fn new(a: SystemMatrix, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Err(Error::DimensionMismatch("system dimension must be positive".into()));
        }
        if let SystemMatrix::Dense(m) = &a {
            if m.ncols() != n {
                return Err(Error::DimensionMismatch(format!("A is {}x{}, must be square", m.nrows(), m.ncols())));
            }
        }
        if let SystemMatrix::Sparse(m) = &a {
            if m.ncols() != n {
                return Err(Error::DimensionMismatch(format!("A is {}x{}, must be square", m.nrows(), m.ncols())));
            }
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!("B has {} rows, A is {n}x{n}", b.len())));
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch(format!("C has {} columns, A is {n}x{n}", c.len())));
        }
        Ok(LtiSystem { a: Arc::new(a), a_t: OnceLock::new(), b, c, eigenvalues: OnceLock::new() })
    }

    pub fn from_dense(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        Self::new(SystemMatrix::Dense(a), b, c)
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &SystemMatrix {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// A for the controllability gramian, Aᵀ for the observability gramian.
    pub fn operator(&self, kind: GramianKind) -> Arc<SystemMatrix> {
        match kind {
            GramianKind::Controllability => Arc::clone(&self.a),
            GramianKind::Observability => Arc::clone(self.a_t.get_or_init(|| Arc::new(self.a.transpose()))),
        }
    }

    /// B or Cᵀ.
    pub fn start_vector(&self, kind: GramianKind) -> &DVector<f64> {
        match kind {
            GramianKind::Controllability => &self.b,
            GramianKind::Observability => &self.c,
        }
    }

    /// Cached eigenvalues of A (dense computation, capped at [`EIGENVALUE_CAP`]).
    pub fn eigenvalues(&self) -> Result<&[C64]> {
        if let Some(e) = self.eigenvalues.get() {
            return Ok(e);
        }
        let e = self.a.eigenvalues()?;
        Ok(self.eigenvalues.get_or_init(|| e))
    }

    /// Checks that every eigenvalue of A lies in the open left half-plane.
    ///
    /// This is O(n³) and therefore explicit; nothing else in the library calls
    /// it implicitly. Systems above [`EIGENVALUE_CAP`] are accepted unchecked
    /// with a warning.
    pub fn assert_stable(&self) -> Result<()> {
        match self.eigenvalues() {
            Ok(eigs) => {
                let worst = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if worst < 0.0 {
                    Ok(())
                } else {
                    Err(Error::NotStable(worst))
                }
            }
            Err(Error::OracleTooLarge { .. }) => {
                log::warn!("n = {} above eigenvalue cap; stability not verified", self.n());
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// Reduced (possibly complex) system produced by projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub a_hat: CMat,
    pub b_hat: CVec,
    /// Output row stored as a vector.
    pub c_hat: CVec,
}

impl ReducedSystem {
    pub fn r(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.a_hat.iter().chain(self.b_hat.iter()).chain(self.c_hat.iter()).all(|z| z.im == 0.0)
    }

    pub fn write_matrix_market(&self, dir: &Path, prefix: &str) -> Result<()> {
        matrix_market::write_complex_array(dir.join(format!("{prefix}_a.mtx")), &self.a_hat)?;
        matrix_market::write_complex_array(dir.join(format!("{prefix}_b.mtx")), &CMat::from_column_slice(self.r(), 1, self.b_hat.as_slice()))?;
        matrix_market::write_complex_array(dir.join(format!("{prefix}_c.mtx")), &CMat::from_row_slice(1, self.r(), self.c_hat.as_slice()))
    }
}

/// Common surface for transfer-function evaluation of full and reduced models.
pub trait StateSpace {
    fn order(&self) -> usize;
    fn input(&self) -> CVec;
    fn output(&self) -> CVec;
    fn apply_a(&self, x: &CVec) -> CVec;
    /// Factorization of sI - A, or `SingularShift`.
    fn resolvent(&self, s: C64) -> Result<Factorization>;
}

impl StateSpace for LtiSystem {
    fn order(&self) -> usize {
        self.n()
    }
    fn input(&self) -> CVec {
        complexify_vec(&self.b)
    }
    fn output(&self) -> CVec {
        complexify_vec(&self.c)
    }
    fn apply_a(&self, x: &CVec) -> CVec {
        self.a.apply(x)
    }
    fn resolvent(&self, s: C64) -> Result<Factorization> {
        Factorization::shifted(&self.a, s, C64::new(1.0, 0.0)).ok_or(Error::SingularShift(s))
    }
}

impl StateSpace for ReducedSystem {
    fn order(&self) -> usize {
        self.r()
    }
    fn input(&self) -> CVec {
        self.b_hat.clone()
    }
    fn output(&self) -> CVec {
        self.c_hat.clone()
    }
    fn apply_a(&self, x: &CVec) -> CVec {
        &self.a_hat * x
    }
    fn resolvent(&self, s: C64) -> Result<Factorization> {
        let r = self.r();
        let m = CMat::identity(r, r) * s - &self.a_hat;
        Factorization::dense(m).ok_or(Error::SingularShift(s))
    }
}

/// G(s) = C(sI - A)⁻¹B by one factorization and one solve.
pub fn transfer_function<S: StateSpace + ?Sized>(sys: &S, s: C64) -> Result<C64> {
    let f = sys.resolvent(s)?;
    let x = f.solve_vec(&sys.input());
    Ok(sys.output().dot(&x))
}

/// Moments m_0..m_{count-1} at `s0`, sharing one factorization of s0·I - A.
pub fn moments<S: StateSpace + ?Sized>(sys: &S, s0: C64, count: usize) -> Result<Vec<C64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let f = sys.resolvent(s0)?;
    let c = sys.output();
    let mut x = sys.input();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        x = f.solve_vec(&x);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.push(c.dot(&x) * sign);
    }
    Ok(out)
}

/// m_j(s0) = -C(A - s0 I)^{-(j+1)}B = (-1)^j/j! G^{(j)}(s0).
pub fn moment<S: StateSpace + ?Sized>(sys: &S, s0: C64, j: usize) -> Result<C64> {
    Ok(moments(sys, s0, j + 1)?[j])
}

/// Markov parameters m_1(∞)..m_count(∞), i.e. CB, CAB, CA²B, ...
pub fn markov_parameters<S: StateSpace + ?Sized>(sys: &S, count: usize) -> Vec<C64> {
    let c = sys.output();
    let mut x = sys.input();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        if j > 0 {
            x = sys.apply_a(&x);
        }
        out.push(c.dot(&x));
    }
    out
}

/// m_j(∞) = CA^{j-1}B for j ≥ 1.
pub fn markov_parameter<S: StateSpace + ?Sized>(sys: &S, j: usize) -> Result<C64> {
    if j == 0 {
        return Err(Error::InvalidArgument("Markov parameters are indexed from 1".into()));
    }
    Ok(markov_parameters(sys, j)[j - 1])
}

/// Exact gramian: AP + PAᵀ + BBᵀ = 0 (or AᵀQ + QA + CᵀC = 0).
///
/// The Kronecker system (I⊗A + A⊗I) vec(P) = -vec(BBᵀ) is solved in the
/// complex Schur basis of A, where it becomes block triangular
/// (Bartels-Stewart). Refuses n > [`LYAPUNOV_CAP`].
pub fn solve_lyapunov_dense(sys: &LtiSystem, kind: GramianKind) -> Result<DMatrix<f64>> {
    let n = sys.n();
    if n > LYAPUNOV_CAP {
        return Err(Error::OracleTooLarge { size: n, cap: LYAPUNOV_CAP });
    }
    let a = sys.operator(kind).to_dense();
    let v = sys.start_vector(kind);
    let rhs = -(v * v.transpose());
    lyapunov_schur(&a, &rhs)
}

/// Solves AX + XAᵀ = F for real A, F.
pub fn lyapunov_schur(a: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let (q, t) = Schur::new(complexify(a)).unpack();
    let ft = q.adjoint() * complexify(f) * &q;
    let mut y = CMat::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs = ft.column(j).into_owned();
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            if tjk != C64::new(0.0, 0.0) {
                rhs -= y.column(k) * tjk;
            }
        }
        let shift = t[(j, j)].conj();
        // upper triangular solve with T + shift·I
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in i + 1..n {
                acc -= t[(i, l)] * rhs[l];
            }
            let d = t[(i, i)] + shift;
            if d.norm() == 0.0 {
                return Err(Error::SingularShift(-shift));
            }
            rhs[i] = acc / d;
        }
        y.set_column(j, &rhs);
    }
    let p = (&q * y * q.adjoint()).map(|z| z.re);
    Ok((&p + p.transpose()) * 0.5)
}

/// Explicit Kronecker-vectorised solve; O(n⁶), only for small cross-checks.
pub fn solve_lyapunov_kronecker(sys: &LtiSystem, kind: GramianKind) -> Result<DMatrix<f64>> {
    let n = sys.n();
    if n > KRONECKER_LYAPUNOV_CAP {
        return Err(Error::OracleTooLarge { size: n, cap: KRONECKER_LYAPUNOV_CAP });
    }
    let a = sys.operator(kind).to_dense();
    let v = sys.start_vector(kind);
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(&a) + a.kronecker(&eye);
    let rhs = -(v * v.transpose());
    let vec_rhs = DVector::from_column_slice(rhs.as_slice());
    let sol = k.lu().solve(&vec_rhs).ok_or(Error::SingularShift(C64::new(0.0, 0.0)))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Loads A, B, C from Matrix Market files. Coordinate files for A below
/// [`SPARSE_DENSITY_THRESHOLD`] fill are kept sparse. Stability is not checked.
pub fn load_system(path_a: impl AsRef<Path>, path_b: impl AsRef<Path>, path_c: impl AsRef<Path>) -> Result<LtiSystem> {
    let a = matrix_market::read_real(path_a.as_ref())?;
    let b = matrix_market::read_real(path_b.as_ref())?;
    let c = matrix_market::read_real(path_c.as_ref())?;
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch(format!("A is {}x{}, must be square", a.nrows, a.ncols)));
    }
    let n = a.nrows;
    if b.ncols != 1 {
        return Err(Error::DimensionMismatch(format!("B has {} columns; only single-input systems are supported", b.ncols)));
    }
    if b.nrows != n {
        return Err(Error::DimensionMismatch(format!("B is {}x1, A is {n}x{n}", b.nrows)));
    }
    if c.nrows != 1 {
        return Err(Error::DimensionMismatch(format!("C has {} rows; only single-output systems are supported", c.nrows)));
    }
    if c.ncols != n {
        return Err(Error::DimensionMismatch(format!("C is 1x{}, A is {n}x{n}", c.ncols)));
    }
    let a_mat = if a.layout == Layout::Coordinate && a.density() < SPARSE_DENSITY_THRESHOLD {
        SystemMatrix::Sparse(a.to_csr())
    } else {
        SystemMatrix::Dense(a.to_dense())
    };
    let b_vec = DVector::from_column_slice(b.to_dense().as_slice());
    let c_vec = DVector::from_column_slice(c.to_dense().as_slice());
    LtiSystem::new(a_mat, b_vec, c_vec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn scalar() -> LtiSystem {
        LtiSystem::from_dense(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)).unwrap()
    }

    fn diag12() -> LtiSystem {
        LtiSystem::from_dense(
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])),
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn transfer_function_examples() {
        assert!((transfer_function(&scalar(), c(1.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        // partial fractions 1/(s+1) + 1/(s+2) at s = 0
        assert!((transfer_function(&diag12(), c(0.0, 0.0)).unwrap() - c(1.5, 0.0)).norm() < 1e-15);
        assert!(matches!(transfer_function(&scalar(), c(-1.0, 0.0)), Err(Error::SingularShift(_))));
    }

    #[test]
    fn moment_examples() {
        let sys = scalar();
        assert!((moment(&sys, c(1.0, 0.0), 0).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        // -(d/ds) 1/(s+1) at s = 1
        assert!((moment(&sys, c(1.0, 0.0), 1).unwrap() - c(-0.25, 0.0)).norm() < 1e-15);
        let s0 = c(0.3, 1.7);
        assert_eq!(moment(&diag12(), s0, 0).unwrap(), transfer_function(&diag12(), s0).unwrap());
    }

    #[test]
    fn markov_examples() {
        let sys = scalar();
        assert_eq!(markov_parameter(&sys, 1).unwrap(), c(1.0, 0.0));
        assert_eq!(markov_parameter(&sys, 3).unwrap(), c(1.0, 0.0));
        assert_eq!(markov_parameter(&diag12(), 2).unwrap(), c(-3.0, 0.0));
        assert!(markov_parameter(&sys, 0).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let p = solve_lyapunov_dense(&diag12(), GramianKind::Controllability).unwrap();
        // P_ij = -B_i B_j / (λ_i + λ_j)
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        assert!((&p - &expect).norm() < 1e-14);
        let q = solve_lyapunov_dense(&diag12(), GramianKind::Observability).unwrap();
        assert!((&q - &expect).norm() < 1e-14);
        let zero_b = LtiSystem::from_dense(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(solve_lyapunov_dense(&zero_b, GramianKind::Controllability).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn lyapunov_cap_enforced() {
        let n = LYAPUNOV_CAP + 1;
        let sys = LtiSystem::new(
            SystemMatrix::Sparse(CsrMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, -1.0)).collect::<Vec<_>>())),
            DVector::from_element(n, 1.0),
            DVector::from_element(n, 1.0),
        )
        .unwrap();
        assert!(matches!(solve_lyapunov_dense(&sys, GramianKind::Controllability), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn stability_check() {
        assert!(diag12().assert_stable().is_ok());
        let unstable = LtiSystem::from_dense(DMatrix::from_element(1, 1, 0.5), DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        assert!(matches!(unstable.assert_stable(), Err(Error::NotStable(_))));
    }

    #[test]
    fn sparse_and_dense_agree() {
        let dense = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, 0.5]);
        let cc = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let s1 = LtiSystem::from_dense(dense.clone(), b.clone(), cc.clone()).unwrap();
        let s2 = LtiSystem::new(SystemMatrix::Sparse(CsrMatrix::from_dense(&dense)), b, cc).unwrap();
        let s = c(0.2, 0.9);
        let g1 = transfer_function(&s1, s).unwrap();
        let g2 = transfer_function(&s2, s).unwrap();
        assert!((g1 - g2).norm() < 1e-14);
    }
}

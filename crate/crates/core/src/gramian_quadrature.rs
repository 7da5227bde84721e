//! Runge-Kutta quadrature of the gramian ODE, producing low-rank factors Z
//! with ZZᴴ approximating the controllability or observability gramian.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DVector, Schur};

use crate::error::{Error, Result};
use crate::linalg::{self, complexify_vec, CMat, CVec, C64};
use crate::matrix_market;
use crate::shifted_solver::ShiftedSolver;
use crate::system_model::{GramianKind, LtiSystem, SystemMatrix};
use crate::tableau::{self, ButcherTableau};

/// Largest n·s for which the Kronecker stage solve is allowed.
pub const KRONECKER_CAP: usize = 2000;

/// Z with ZZᴴ ≈ gramian, plus the shifts ω_jμ_p that generated it.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub z: CMat,
    pub kind: GramianKind,
    /// ω_j·μ_p for every step j and tableau eigenvalue p, in step order.
    pub shifts: Vec<C64>,
    pub steps: Vec<f64>,
}

impl LowRankFactor {
    pub fn empty(n: usize, kind: GramianKind) -> Self {
        LowRankFactor { z: CMat::zeros(n, 0), kind, shifts: Vec::new(), steps: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn gramian(&self) -> CMat {
        &self.z * self.z.adjoint()
    }

    /// Whether the generating shifts are closed under conjugation.
    pub fn shifts_conjugate_closed(&self) -> bool {
        shifts_conjugate_closed(&self.shifts)
    }
}

pub(crate) fn shifts_conjugate_closed(shifts: &[C64]) -> bool {
    let mut used = vec![false; shifts.len()];
    for i in 0..shifts.len() {
        if used[i] {
            continue;
        }
        let z = shifts[i];
        let tol = 1e-10 * z.norm().max(1.0);
        if z.im.abs() <= tol {
            used[i] = true;
            continue;
        }
        match (0..shifts.len()).find(|&j| j != i && !used[j] && (shifts[j] - z.conj()).norm() <= tol) {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// h_j, the factor so far, and j.
#[derive(Debug, Clone)]
pub struct QuadratureState {
    pub h: CVec,
    pub z: LowRankFactor,
    pub step_index: usize,
}

impl QuadratureState {
    /// h_0 = B (or Cᵀ), Z_0 = [].
    pub fn initial(sys: &LtiSystem, kind: GramianKind) -> Self {
        QuadratureState { h: complexify_vec(sys.start_vector(kind)), z: LowRankFactor::empty(sys.n(), kind), step_index: 0 }
    }
}

/// A tableau with the Schur form of Λᵀ = Q·T·Qᴴ computed once.
#[derive(Debug, Clone)]
pub struct PreparedTableau {
    tableau: ButcherTableau,
    q: CMat,
    t: CMat,
    /// 𝟙ᵀQ
    alpha: Vec<C64>,
}

impl PreparedTableau {
    pub fn new(tableau: &ButcherTableau) -> Self {
        let lt = tableau.lambda().transpose();
        let s = lt.nrows();
        let (q, t) = if linalg::is_upper_triangular(&lt) {
            (CMat::identity(s, s), lt)
        } else {
            Schur::new(lt).unpack()
        };
        let alpha = (0..s).map(|i| q.column(i).sum()).collect();
        PreparedTableau { tableau: tableau.clone(), q, t, alpha }
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    /// Diagonal of the triangular factor: the eigenvalues of Λ.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal().iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageSolve {
    #[default]
    Schur,
    Kronecker,
}

#[derive(Debug, Clone, Default)]
pub struct QuadratureOptions {
    /// Keep columns whose gramian weight β̃_i is zero.
    pub keep_zero_weight_columns: bool,
    pub stage_solve: StageSolve,
    /// Write Z after every step as Matrix Market into this directory.
    pub dump_dir: Option<PathBuf>,
}

/// Stage values ℋ (n×s) from ℋ = h𝟙ᵀ + ωAℋΛᵀ via the triangular Schur form.
pub fn stage_solve_schur(solver: &ShiftedSolver, h: &CVec, prepared: &PreparedTableau, omega: f64) -> Result<CMat> {
    let a = solver.matrix();
    let n = h.len();
    let s = prepared.t.nrows();
    let mut hp = CMat::zeros(n, s);
    for i in 0..s {
        let mut coupling = CVec::zeros(n);
        let mut any = false;
        for l in 0..i {
            let tli = prepared.t[(l, i)];
            if tli != C64::new(0.0, 0.0) {
                coupling.axpy(tli, &hp.column(l), C64::new(1.0, 0.0));
                any = true;
            }
        }
        let mut rhs = h * prepared.alpha[i];
        if any {
            rhs += a.apply(&coupling) * C64::new(omega, 0.0);
        }
        let shift = prepared.t[(i, i)] * omega;
        let x = solver.solve_vec(shift, &rhs).map_err(|e| match e {
            Error::SingularShiftedOperator { shift, .. } | Error::SingularShift(shift) => {
                Error::SingularShiftedOperator { shift, stage: Some(i) }
            }
            other => other,
        })?;
        hp.set_column(i, &x);
    }
    Ok(hp * prepared.q.adjoint())
}

/// Same contract as [`stage_solve_schur`] via the ns×ns system
/// (I - ω(Λ⊗A))·vec(ℋ) = 𝟙_s⊗h.
pub fn stage_solve_kron(a: &SystemMatrix, h: &CVec, t: &ButcherTableau, omega: f64) -> Result<CMat> {
    let n = h.len();
    let s = t.stages();
    if n * s > KRONECKER_CAP {
        return Err(Error::OracleTooLarge { size: n * s, cap: KRONECKER_CAP });
    }
    let ad = linalg::complexify(&a.to_dense());
    let mut m = CMat::identity(n * s, n * s);
    for i in 0..s {
        for l in 0..s {
            let coef = t.lambda()[(i, l)] * omega;
            if coef == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = m.view_mut((i * n, l * n), (n, n));
            block -= &ad * coef;
        }
    }
    let rhs = CVec::from_iterator(n * s, (0..s).flat_map(|_| h.iter().copied()));
    let lu = m.lu();
    let x = lu.solve(&rhs).ok_or(Error::SingularShiftedOperator { shift: C64::new(omega, 0.0), stage: None })?;
    Ok(CMat::from_column_slice(n, s, x.as_slice()))
}

fn stage_values(solver: &ShiftedSolver, h: &CVec, prepared: &PreparedTableau, omega: f64, opts: &QuadratureOptions) -> Result<CMat> {
    match opts.stage_solve {
        StageSolve::Schur => stage_solve_schur(solver, h, prepared, omega),
        StageSolve::Kronecker => stage_solve_kron(solver.matrix(), h, &prepared.tableau, omega),
    }
}

/// One step: Z_j = [Z_{j-1}, ℋ·diag(ωβ̃)^{1/2}], h_j = h_{j-1} + ωAℋβ.
///
/// `beta_tilde` overrides the tableau's gramian weights for this step only.
pub fn quadrature_step_weighted(
    solver: &ShiftedSolver,
    state: &QuadratureState,
    prepared: &PreparedTableau,
    omega: f64,
    beta_tilde: &DVector<f64>,
    opts: &QuadratureOptions,
) -> Result<QuadratureState> {
    tableau::validate_steps(&[omega])?;
    let t = &prepared.tableau;
    let stages = stage_values(solver, &state.h, prepared, omega, opts)?;

    let kept: Vec<usize> = (0..t.stages()).filter(|&i| opts.keep_zero_weight_columns || beta_tilde[i] > 0.0).collect();
    let n = state.h.len();
    let old = &state.z.z;
    let mut z = CMat::zeros(n, old.ncols() + kept.len());
    z.columns_mut(0, old.ncols()).copy_from(old);
    for (c, &i) in kept.iter().enumerate() {
        let w = (omega * beta_tilde[i]).sqrt();
        z.set_column(old.ncols() + c, &(stages.column(i) * C64::new(w, 0.0)));
    }

    let combo = &stages * t.beta();
    let h = &state.h + solver.matrix().apply(&combo) * C64::new(omega, 0.0);

    let mut shifts = state.z.shifts.clone();
    shifts.extend(prepared.eigenvalues().iter().map(|m| m * omega));
    let mut steps = state.z.steps.clone();
    steps.push(omega);
    let next = QuadratureState { h, z: LowRankFactor { z, kind: state.z.kind, shifts, steps }, step_index: state.step_index + 1 };
    if let Some(dir) = &opts.dump_dir {
        let kind = match next.z.kind {
            GramianKind::Controllability => "c",
            GramianKind::Observability => "o",
        };
        matrix_market::write_complex_array(dir.join(format!("z_{kind}_{:03}.mtx", next.step_index)), &next.z.z)?;
    }
    Ok(next)
}

pub fn quadrature_step(
    solver: &ShiftedSolver,
    state: &QuadratureState,
    prepared: &PreparedTableau,
    omega: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureState> {
    quadrature_step_weighted(solver, state, prepared, omega, prepared.tableau.beta_tilde(), opts)
}

/// Rejects tableau/step/system combinations for which a stage system is singular.
pub fn ensure_eig_condition(sys: &LtiSystem, t: &ButcherTableau, steps: &[f64]) -> Result<()> {
    match sys.eigenvalues() {
        Ok(eigs) => {
            let bad = tableau::eig_condition_violations(t, eigs, steps);
            if bad.is_empty() {
                Ok(())
            } else {
                Err(Error::EigConditionViolated(bad))
            }
        }
        Err(Error::OracleTooLarge { .. }) => {
            tableau::check_eig_condition(t, sys, steps);
            Ok(())
        }
        Err(e) => Err(e),
    }
}

pub fn run_quadrature(sys: &LtiSystem, kind: GramianKind, t: &ButcherTableau, steps: &[f64]) -> Result<LowRankFactor> {
    run_quadrature_with(sys, kind, t, steps, &QuadratureOptions::default())
}

pub fn run_quadrature_with(
    sys: &LtiSystem,
    kind: GramianKind,
    t: &ButcherTableau,
    steps: &[f64],
    opts: &QuadratureOptions,
) -> Result<LowRankFactor> {
    tableau::validate_steps(steps)?;
    ensure_eig_condition(sys, t, steps)?;
    let solver = ShiftedSolver::new(sys.operator(kind));
    run_with_solver(&solver, sys, kind, t, steps, opts)
}

/// As [`run_quadrature_with`] but with a caller-owned solver (and its cache).
/// The eigenvalue condition is not checked here.
pub fn run_with_solver(
    solver: &ShiftedSolver,
    sys: &LtiSystem,
    kind: GramianKind,
    t: &ButcherTableau,
    steps: &[f64],
    opts: &QuadratureOptions,
) -> Result<LowRankFactor> {
    let prepared = PreparedTableau::new(t);
    let mut state = QuadratureState::initial(sys, kind);
    for &omega in steps {
        state = quadrature_step(solver, &state, &prepared, omega, opts)?;
        log::debug!("{kind:?} step {} (ω = {omega:e}): {} columns", state.step_index, state.z.k());
    }
    Ok(state.z)
}

/// Convenience: a solver for `sys` and `kind` behind an `Arc`.
pub fn solver_for(sys: &LtiSystem, kind: GramianKind) -> Arc<ShiftedSolver> {
    Arc::new(ShiftedSolver::new(sys.operator(kind)))
}

/// `count` logarithmically spaced step sizes covering [lo, hi].
pub fn log_spaced_steps(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::system_model::solve_lyapunov_dense;
    use crate::tableau::builtin;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64) -> LtiSystem {
        LtiSystem::from_dense(DMatrix::from_element(1, 1, a), DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)).unwrap()
    }

    fn diag12() -> LtiSystem {
        LtiSystem::from_dense(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])), DVector::from_element(2, 1.0), DVector::from_element(2, 1.0))
            .unwrap()
    }

    fn random_stable(n: usize, seed: u64) -> LtiSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = (&g - g.transpose()) * 0.5 - DMatrix::identity(n, n) * 1.0 - &g * g.transpose() / (n as f64);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let cv = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        LtiSystem::from_dense(a, b, cv).unwrap()
    }

    fn solver(sys: &LtiSystem) -> ShiftedSolver {
        ShiftedSolver::new(sys.operator(GramianKind::Controllability))
    }

    fn one(n: usize) -> CVec {
        CVec::from_element(n, c(1.0, 0.0))
    }

    #[test]
    fn stage_solve_examples() {
        let sys = scalar(-1.0);
        let be = PreparedTableau::new(&builtin("backward-euler").unwrap());
        let h = stage_solve_schur(&solver(&sys), &one(1), &be, 1.0).unwrap();
        assert!((h[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);

        let ee = PreparedTableau::new(&builtin("explicit-euler").unwrap());
        let hv = CVec::from_element(1, c(0.3, -0.7));
        assert_eq!(stage_solve_schur(&solver(&sys), &hv, &ee, 2.0).unwrap()[(0, 0)], c(0.3, -0.7));

        let gl = builtin("gl2").unwrap();
        let s1 = stage_solve_schur(&solver(&sys), &one(1), &PreparedTableau::new(&gl), 1.0).unwrap();
        let s2 = stage_solve_kron(sys.a(), &one(1), &gl, 1.0).unwrap();
        assert!((s1 - s2).norm() < 1e-10);

        let d = diag12();
        let k = stage_solve_kron(d.a(), &one(2), &builtin("backward-euler").unwrap(), 1.0).unwrap();
        assert!((k[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15 && (k[(1, 0)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kronecker_cap() {
        let sys = random_stable(1001, 1);
        let r = stage_solve_kron(sys.a(), &one(1001), &builtin("gl2").unwrap(), 1.0);
        assert!(matches!(r, Err(Error::OracleTooLarge { size: 2002, cap: 2000 })));
    }

    #[test]
    fn step_examples() {
        let sys = scalar(-1.0);
        let opts = QuadratureOptions::default();
        let st = QuadratureState::initial(&sys, GramianKind::Controllability);
        let be = PreparedTableau::new(&builtin("backward-euler").unwrap());
        let next = quadrature_step(&solver(&sys), &st, &be, 1.0, &opts).unwrap();
        assert!((next.z.z[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((next.h[0] - c(0.5, 0.0)).norm() < 1e-15);

        let ee = PreparedTableau::new(&builtin("explicit-euler").unwrap());
        let next = quadrature_step(&solver(&sys), &st, &ee, 1.0, &opts).unwrap();
        assert_eq!(next.z.z[(0, 0)], c(1.0, 0.0));
        assert_eq!(next.h[0], c(0.0, 0.0));

        let zero = builtin("backward-euler").unwrap().with_beta_tilde(DVector::zeros(1)).unwrap();
        let next = quadrature_step(&solver(&sys), &st, &PreparedTableau::new(&zero), 1.0, &opts).unwrap();
        assert_eq!(next.z.k(), 0);
        let keep = QuadratureOptions { keep_zero_weight_columns: true, ..Default::default() };
        let next = quadrature_step(&solver(&sys), &st, &PreparedTableau::new(&zero), 1.0, &keep).unwrap();
        assert_eq!(next.z.z[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn empty_schedule() {
        let z = run_quadrature(&diag12(), GramianKind::Controllability, &builtin("gl2").unwrap(), &[]).unwrap();
        assert_eq!(z.z.shape(), (2, 0));
    }

    #[test]
    fn midpoint_converges_to_gramian() {
        let sys = diag12();
        let steps = log_spaced_steps(50, 1e-2, 1e2);
        let z = run_quadrature(&sys, GramianKind::Controllability, &builtin("implicit-midpoint").unwrap(), &steps).unwrap();
        let p = linalg::complexify(&solve_lyapunov_dense(&sys, GramianKind::Controllability).unwrap());
        let err = (z.gramian() - &p).norm() / p.norm();
        assert!(err < 1e-2, "relative gramian error {err}");
    }

    #[test]
    fn eig_condition_enforced() {
        let neg = ButcherTableau::from_real(&[&[-1.0]], &[1.0], &[0.0]).unwrap();
        match run_quadrature(&scalar(-2.0), GramianKind::Controllability, &neg, &[0.5]) {
            Err(Error::EigConditionViolated(v)) => assert_eq!(v, vec![(0, 0, 0)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn column_count_and_shifts() {
        let sys = random_stable(8, 3);
        let z = run_quadrature(&sys, GramianKind::Observability, &builtin("gl2").unwrap(), &[0.1, 0.5, 2.0]).unwrap();
        assert_eq!(z.k(), 6);
        assert_eq!(z.shifts.len(), 6);
        assert!(z.shifts_conjugate_closed());
        assert!(!shifts_conjugate_closed(&[c(1.0, 1.0)]));
    }

    #[test]
    fn first_increment_is_consistent() {
        let sys = random_stable(6, 9);
        let bbt = linalg::complexify(&(sys.b() * sys.b().transpose()));
        for name in ["backward-euler", "implicit-midpoint", "gl2", "radau2"] {
            let mut errs = Vec::new();
            for &w in &[1e-3, 5e-4] {
                let z = run_quadrature(&sys, GramianKind::Controllability, &builtin(name).unwrap(), &[w]).unwrap();
                errs.push((z.gramian() - &bbt * c(w, 0.0)).norm());
            }
            // O(ω²): halving ω should quarter the defect
            assert!(errs[1] < errs[0] * 0.3, "{name}: {errs:?}");
        }
    }

    fn arb_tableau() -> impl Strategy<Value = ButcherTableau> {
        (prop::collection::vec(-1.0f64..1.0, 4), prop::collection::vec(0.0f64..1.0, 2)).prop_filter_map("invalid", |(l, b)| {
            let lam = CMat::from_fn(2, 2, |i, j| c(l[2 * i + j], 0.0));
            let beta = CVec::from_iterator(2, b.iter().map(|&x| c(x, 0.0)));
            let t = ButcherTableau::with_classical_weights(lam, beta, DVector::zeros(2)).ok()?;
            // keep the stage systems comfortably nonsingular for stable A
            t.eigenvalues().iter().all(|m| m.re > 0.05).then_some(t)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn schur_matches_kronecker(t in arb_tableau(), seed in 0u64..1000, omega in 0.05f64..3.0) {
            let sys = random_stable(10, seed);
            let h = complexify_vec(sys.b());
            let s1 = stage_solve_schur(&solver(&sys), &h, &PreparedTableau::new(&t), omega).unwrap();
            let s2 = stage_solve_kron(sys.a(), &h, &t, omega).unwrap();
            prop_assert!((&s1 - &s2).norm() <= 1e-10 * s2.norm().max(1.0));
            // residual of ℋ = h𝟙ᵀ + ωAℋΛᵀ
            let ad = linalg::complexify(&sys.a().to_dense());
            let resid = &s1 - CMat::from_fn(10, 2, |i, _| h[i]) - &ad * &s1 * t.lambda().transpose() * c(omega, 0.0);
            prop_assert!(resid.norm() <= 1e-9 * s1.norm());
        }

        #[test]
        fn factor_is_psd_and_grows_by_s(seed in 0u64..1000, steps in prop::collection::vec(0.01f64..5.0, 1..5), which in 0usize..5) {
            let t = crate::tableau::BuiltinTableau::ALL[which].tableau();
            let sys = random_stable(7, seed);
            let z = run_quadrature(&sys, GramianKind::Controllability, &t, &steps).unwrap();
            prop_assert_eq!(z.k(), t.stages() * steps.len());
            let p = z.gramian();
            prop_assert!(linalg::min_hermitian_eigenvalue(&p) >= -1e-10 * linalg::spectral_norm(&p));
        }
    }
}

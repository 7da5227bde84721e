//! Balancing projections from two low-rank gramian factors, and the dense
//! square-root balanced truncation used as ground truth.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian_quadrature::{shifts_conjugate_closed, LowRankFactor};
use crate::linalg::{complexify, complexify_vec, CMat, C64};
use crate::system_model::{solve_lyapunov_dense, GramianKind, LtiSystem, ReducedSystem};

/// Relative cutoff below which a singular value of Z_oᴴZ_c counts as zero.
pub const RANK_TOL: f64 = 1e-12;
const REALIFY_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Truncation {
    /// Keep everything; rank deficiency is an error.
    #[default]
    FullRank,
    /// Drop σ_i ≤ τ·σ_1.
    Threshold(f64),
    /// Keep the leading r singular values.
    FixedOrder(usize),
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::FullRank => write!(f, "full"),
            Truncation::Threshold(t) => write!(f, "threshold:{t:e}"),
            Truncation::FixedOrder(r) => write!(f, "order:{r}"),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    /// `full`, `threshold:<τ>` or `order:<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("truncation '{s}': expected full, threshold:<tau> or order:<r>"));
        match s.trim().split_once(':') {
            None if s.trim() == "full" => Ok(Truncation::FullRank),
            Some(("threshold", v)) => match v.parse::<f64>() {
                Ok(t) if t > 0.0 && t < 1.0 => Ok(Truncation::Threshold(t)),
                _ => Err(bad()),
            },
            Some(("order", v)) => match v.parse::<usize>() {
                Ok(r) if r > 0 => Ok(Truncation::FixedOrder(r)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Whether the moment-matching guarantees apply to a reduced model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Guarantee {
    Interpolating,
    OutsideGuarantees(String),
}

impl Guarantee {
    pub fn holds(&self) -> bool {
        matches!(self, Guarantee::Interpolating)
    }
}

#[derive(Debug, Clone)]
pub struct BalancingResult {
    pub reduced: ReducedSystem,
    pub v: CMat,
    pub w: CMat,
    /// Retained singular values, nonincreasing.
    pub sigma: Vec<f64>,
    /// All singular values of Z_oᴴZ_c.
    pub sigma_all: Vec<f64>,
    pub r: usize,
    pub truncation: Truncation,
    pub guarantee: Guarantee,
    pub realified: bool,
    pub shifts_c: Vec<C64>,
    pub shifts_o: Vec<C64>,
}

impl BalancingResult {
    /// ‖WᴴV - I‖_F
    pub fn biorthogonality_defect(&self) -> f64 {
        (self.w.adjoint() * &self.v - CMat::identity(self.r, self.r)).norm()
    }
}

/// SVD with singular values sorted nonincreasing.
fn sorted_svd(m: CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = CMat::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let t = CMat::from_fn(vt.ncols(), order.len(), |i, j| vt[(order[j], i)].conj());
    (u, order.iter().map(|&i| svd.singular_values[i]).collect(), t)
}

/// (WᴴAV, WᴴB, CV)
pub fn project(sys: &LtiSystem, v: &CMat, w: &CMat) -> ReducedSystem {
    let av = sys.a().apply_mat(v);
    ReducedSystem {
        a_hat: w.adjoint() * av,
        b_hat: w.adjoint() * complexify_vec(sys.b()),
        c_hat: v.transpose() * complexify_vec(sys.c()),
    }
}

struct Projection {
    v: CMat,
    w: CMat,
    sigma: Vec<f64>,
    sigma_all: Vec<f64>,
    r: usize,
}

fn balance_from_svd(
    z_c: &CMat,
    z_o: &CMat,
    truncation: Truncation,
    require_full: bool,
) -> Result<Projection> {
    if z_c.ncols() == 0 || z_o.ncols() == 0 {
        return Err(Error::EmptyFactor);
    }
    let (u, sigma, t) = sorted_svd(z_o.adjoint() * z_c);
    let s1 = sigma[0];
    let rank = sigma.iter().filter(|&&x| x > RANK_TOL * s1).count();
    let required = z_c.ncols().min(z_o.ncols());
    let r = match truncation {
        Truncation::FullRank => {
            if require_full && rank < required {
                return Err(Error::RankDeficient { rank, required });
            }
            rank
        }
        Truncation::Threshold(tau) => sigma.iter().filter(|&&x| x > tau * s1).count(),
        Truncation::FixedOrder(k) => k.min(rank),
    };
    if r == 0 {
        return Err(Error::RankDeficient { rank: 0, required });
    }
    let scale = DVector::from_iterator(r, sigma[..r].iter().map(|&x| C64::new(1.0 / x.sqrt(), 0.0)));
    let v = z_c * t.columns(0, r) * CMat::from_diagonal(&scale);
    let w = z_o * u.columns(0, r) * CMat::from_diagonal(&scale);
    Ok(Projection { v, w, sigma: sigma[..r].to_vec(), sigma_all: sigma, r })
}

/// Approximate balancing transformation from Z_c and Z_o:
/// Z_oᴴZ_c = UΣTᴴ, V = Z_cTΣ^{-1/2}, W = Z_oUΣ^{-1/2}.
pub fn approximate_balance(sys: &LtiSystem, z_c: &LowRankFactor, z_o: &LowRankFactor, truncation: Truncation) -> Result<BalancingResult> {
    if z_c.kind != GramianKind::Controllability || z_o.kind != GramianKind::Observability {
        return Err(Error::InvalidArgument("expected a controllability and an observability factor".into()));
    }
    let Projection { v, w, sigma, sigma_all, r } = balance_from_svd(&z_c.z, &z_o.z, truncation, true)?;
    let guarantee = match truncation {
        Truncation::FullRank if z_c.k() == z_o.k() => Guarantee::Interpolating,
        Truncation::FullRank => {
            Guarantee::OutsideGuarantees(format!("factor widths differ ({} vs {}); only the smaller span is preserved", z_c.k(), z_o.k()))
        }
        _ => {
            log::warn!("truncated reduction ({truncation}): interpolation at the predicted points is not guaranteed");
            Guarantee::OutsideGuarantees(format!("truncated ({truncation})"))
        }
    };
    Ok(BalancingResult {
        reduced: project(sys, &v, &w),
        v,
        w,
        sigma,
        sigma_all,
        r,
        truncation,
        guarantee,
        realified: false,
        shifts_c: z_c.shifts.clone(),
        shifts_o: z_o.shifts.clone(),
    })
}

/// S with S·Sᵀ = M for symmetric positive semidefinite M (negative
/// eigenvalues from rounding are clipped).
pub fn psd_square_root(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&scale)
}

/// Square roots of the eigenvalues of PQ, nonincreasing.
pub fn hankel_singular_values(sys: &LtiSystem) -> Result<Vec<f64>> {
    let s = psd_square_root(&solve_lyapunov_dense(sys, GramianKind::Controllability)?);
    let r = psd_square_root(&solve_lyapunov_dense(sys, GramianKind::Observability)?);
    let mut hsv: Vec<f64> = (r.transpose() * s).singular_values().iter().copied().collect();
    hsv.sort_by(|a, b| b.total_cmp(a));
    Ok(hsv)
}

/// Dense square-root balanced truncation to order r.
pub fn exact_balanced_truncation(sys: &LtiSystem, r: usize) -> Result<BalancingResult> {
    let p = solve_lyapunov_dense(sys, GramianKind::Controllability)?;
    let q = solve_lyapunov_dense(sys, GramianKind::Observability)?;
    if r == 0 || r > sys.n() {
        return Err(Error::InvalidArgument(format!("order {r} outside 1..={}", sys.n())));
    }
    let s = complexify(&psd_square_root(&p));
    let rr = complexify(&psd_square_root(&q));
    if p.norm() == 0.0 || q.norm() == 0.0 {
        return Err(Error::RankDeficient { rank: 0, required: r });
    }
    let Projection { v, w, sigma, sigma_all, r: rank } = balance_from_svd(&s, &rr, Truncation::FixedOrder(r), false)?;
    if rank < r {
        return Err(Error::RankDeficient { rank, required: r });
    }
    Ok(BalancingResult {
        reduced: project(sys, &v, &w),
        v,
        w,
        sigma,
        sigma_all,
        r,
        truncation: Truncation::FixedOrder(r),
        guarantee: Guarantee::OutsideGuarantees("exact balanced truncation".into()),
        realified: false,
        shifts_c: Vec::new(),
        shifts_o: Vec::new(),
    })
}

/// Real orthonormal basis of span[Re M, Im M], which must have dim = ncols(M).
fn real_basis(m: &CMat, what: &str) -> Result<DMatrix<f64>> {
    let (n, r) = m.shape();
    let mut stacked = DMatrix::zeros(n, 2 * r);
    for j in 0..r {
        for i in 0..n {
            stacked[(i, j)] = m[(i, j)].re;
            stacked[(i, r + j)] = m[(i, j)].im;
        }
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s1 = svd.singular_values[order[0]];
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > REALIFY_RANK_TOL * s1).count();
    if rank != r {
        return Err(Error::UnpairedShifts(format!("span of {what} is not closed under conjugation ({rank} real directions for {r} columns)")));
    }
    Ok(DMatrix::from_fn(n, r, |i, j| u[(i, order[j])]))
}

/// Replaces V and W by real bases of the same spans, re-biorthogonalized so
/// that WᵀV = I. The reduced model becomes real.
pub fn realify(sys: &LtiSystem, result: &BalancingResult) -> Result<BalancingResult> {
    if !shifts_conjugate_closed(&result.shifts_c) {
        return Err(Error::UnpairedShifts("controllability shifts".into()));
    }
    if !shifts_conjugate_closed(&result.shifts_o) {
        return Err(Error::UnpairedShifts("observability shifts".into()));
    }
    let vr = real_basis(&result.v, "V")?;
    let wr = real_basis(&result.w, "W")?;
    let m = wr.transpose() * &vr;
    let m_inv = m.try_inverse().ok_or(Error::RankDeficient { rank: 0, required: result.r })?;
    let w_new = wr * m_inv.transpose();
    let v = complexify(&vr);
    let w = complexify(&w_new);
    let mut reduced = project(sys, &v, &w);
    for z in reduced.a_hat.iter_mut().chain(reduced.b_hat.iter_mut()).chain(reduced.c_hat.iter_mut()) {
        z.im = 0.0;
    }
    Ok(BalancingResult { reduced, v, w, realified: true, ..result.clone() })
}

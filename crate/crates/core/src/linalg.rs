//! Dense complex helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn complexify_vec(v: &DVector<f64>) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis of the column span. Columns are normalised first so
/// that the rank decision is insensitive to column scaling.
pub fn orthonormal_basis(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    let cols: Vec<CVec> = m
        .column_iter()
        .filter_map(|col| {
            let nrm = col.norm();
            (nrm > 0.0).then(|| col.unscale(nrm))
        })
        .collect();
    if cols.is_empty() {
        return CMat::zeros(n, 0);
    }
    let scaled = CMat::from_columns(&cols);
    let svd = SVD::new(scaled, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let top = svd.singular_values.max();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep: Vec<CVec> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > rel_tol * top)
        .map(|i| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&keep)
    }
}

/// sin of the largest angle between span(`q_inner`) and span(`q_outer`),
/// measured as the distance of the (orthonormal) inner basis from the outer span.
fn containment_sine(q_inner: &CMat, q_outer: &CMat) -> f64 {
    if q_inner.ncols() == 0 {
        return 0.0;
    }
    if q_outer.ncols() == 0 {
        return 1.0;
    }
    let residual = q_inner - q_outer * (q_outer.adjoint() * q_inner);
    spectral_norm(&residual).min(1.0)
}

/// Largest principal angle (radians) between two column spans.
///
/// Computed from sines so that angles near 1e-8 stay resolvable. When the
/// spans have different dimensions the smaller one is tested for containment
/// in the larger one.
pub fn max_principal_angle(a: &CMat, b: &CMat, rank_tol: f64) -> f64 {
    let qa = orthonormal_basis(a, rank_tol);
    let qb = orthonormal_basis(b, rank_tol);
    let sine = match qa.ncols().cmp(&qb.ncols()) {
        std::cmp::Ordering::Less => containment_sine(&qa, &qb),
        std::cmp::Ordering::Greater => containment_sine(&qb, &qa),
        std::cmp::Ordering::Equal => containment_sine(&qa, &qb).max(containment_sine(&qb, &qa)),
    };
    sine.asin()
}

/// Eigenvalues of a small complex matrix. Triangular input is read off the
/// diagonal exactly, which matters for nilpotent (explicit) tableaus where an
/// iterative eigensolver would return O(eps^(1/s)) noise instead of zero.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if is_lower_triangular(m) || is_upper_triangular(m) {
        return m.diagonal().iter().copied().collect();
    }
    let (_, t) = Schur::new(m.clone()).unpack();
    t.diagonal().iter().copied().collect()
}

pub fn is_lower_triangular(m: &CMat) -> bool {
    (0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| m[(i, j)] == C64::new(0.0, 0.0)))
}

pub fn is_upper_triangular(m: &CMat) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)] == C64::new(0.0, 0.0)))
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let herm = (m + m.adjoint()).unscale(2.0);
    SymmetricEigen::new(herm).eigenvalues.min()
}

/// Frobenius norm of a difference relative to the reference.
pub fn relative_difference(x: &CMat, reference: &CMat) -> f64 {
    let denom = reference.norm();
    let diff = (x - reference).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_between_rotated_lines() {
        let theta: f64 = 1e-9;
        let a = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = CMat::from_column_slice(2, 1, &[c(theta.cos(), 0.0), c(theta.sin(), 0.0)]);
        let angle = max_principal_angle(&a, &b, 1e-12);
        assert!((angle - theta).abs() < 1e-15, "{angle}");
    }

    #[test]
    fn basis_ignores_scaling_and_duplicates() {
        let m = CMat::from_column_slice(
            3,
            3,
            &[c(1e-8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1e8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
        );
        assert_eq!(orthonormal_basis(&m, 1e-12).ncols(), 2);
    }

    #[test]
    fn nilpotent_eigenvalues_exact() {
        let mut m = CMat::zeros(4, 4);
        for i in 1..4 {
            for j in 0..i {
                m[(i, j)] = c(0.5, 0.0);
            }
        }
        assert!(eigenvalues(&m).iter().all(|z| *z == c(0.0, 0.0)));
    }
}

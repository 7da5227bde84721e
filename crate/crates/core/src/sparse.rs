//! Compressed-row storage plus a band LU factorization behind a reverse
//! Cuthill-McKee reordering. This is the direct solver used for sparse
//! system matrices; the shifted operators σI - τA share A's pattern.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::linalg::{CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed, explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        for (r, cidx, v) in sorted {
            assert!(r < nrows && cidx < ncols, "triplet ({r}, {cidx}) outside {nrows}x{ncols}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == cidx {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(cidx);
            values.push(v);
        }
        // drop zeros after summation
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, cidx), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                keep_rows.push(r);
                keep_cols.push(cidx);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx: keep_cols, values: keep_vals }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn mul_cvec(&self, x: &CVec) -> CVec {
        CVec::from_iterator(
            self.nrows,
            (0..self.nrows).map(|i| self.row(i).map(|(j, v)| x[j] * v).sum::<C64>()),
        )
    }

    pub fn mul_cmat(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.nrows, x.ncols());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                for k in 0..x.ncols() {
                    out[(i, k)] += x[(j, k)] * v;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// (lower, upper) bandwidth under the given symmetric permutation.
    fn bandwidth(&self, inv_perm: &[usize]) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for (i, j, _) in self.triplets() {
            let (pi, pj) = (inv_perm[i], inv_perm[j]);
            if pi > pj {
                lower = lower.max(pi - pj);
            } else {
                upper = upper.max(pj - pi);
            }
        }
        (lower, upper)
    }

    /// Reverse Cuthill-McKee ordering of the symmetrised pattern.
    /// Returns `perm` with new index i holding old index perm[i].
    pub fn reverse_cuthill_mckee(&self) -> Vec<usize> {
        let n = self.nrows;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j, _) in self.triplets() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&v| (degree[v], v));
        for &start in &by_degree {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
                next.sort_by_key(|&w| (degree[w], w));
                for w in next {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        order
    }
}

/// LU with partial pivoting of the banded matrix P(σI - τA)Pᵀ.
///
/// Row interchanges are applied LINPACK style: multipliers of earlier
/// columns are never swapped, so the solve replays pivots step by step.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    span: usize,
    ab: Vec<C64>,
    piv: Vec<usize>,
    perm: Vec<usize>,
    min_pivot: f64,
    scale: f64,
}

impl BandedLu {
    /// Factor `sigma * I - tau * A` after RCM reordering. Returns `None`
    /// when the reordered bandwidth is too wide for a band solver to pay off.
    pub fn factor(a: &CsrMatrix, sigma: C64, tau: C64) -> Option<Self> {
        let n = a.nrows;
        let identity: Vec<usize> = (0..n).collect();
        let (mut kl, mut ku) = a.bandwidth(&identity);
        let mut perm = identity;
        let rcm = a.reverse_cuthill_mckee();
        let mut inv = vec![0usize; n];
        for (new, &old) in rcm.iter().enumerate() {
            inv[old] = new;
        }
        let (rkl, rku) = a.bandwidth(&inv);
        if rkl + rku < kl + ku {
            kl = rkl;
            ku = rku;
            perm = rcm;
        } else {
            inv = perm.clone();
        }
        if n > 32 && 3 * (2 * kl + ku + 1) > n {
            return None;
        }
        let span = kl + ku; // upper band after fill-in
        let width = kl + span + 1;
        let mut ab = vec![C64::new(0.0, 0.0); n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut scale = sigma.norm();
        for new_i in 0..n {
            ab[idx(new_i, new_i)] += sigma;
            for (old_j, v) in a.row(perm[new_i]) {
                let new_j = inv[old_j];
                let val = -tau * v;
                scale = scale.max(val.norm());
                ab[idx(new_i, new_j)] += val;
            }
        }
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + span).min(n - 1);
            let mut p = k;
            let mut best = ab[idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = ab[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            min_pivot = min_pivot.min(best);
            if best == 0.0 {
                continue;
            }
            if p != k {
                for j in k..=last_col {
                    ab.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = ab[idx(k, k)];
            for i in k + 1..=last_row {
                let l = ab[idx(i, k)] / pivot;
                ab[idx(i, k)] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = ab[idx(k, j)];
                    ab[idx(i, j)] -= l * u;
                }
            }
        }
        Some(BandedLu { n, kl, width, span, ab, piv, perm, min_pivot, scale })
    }

    pub fn is_singular(&self) -> bool {
        self.min_pivot <= (self.n as f64) * f64::EPSILON * self.scale
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.span - self.kl)
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.ab[i * self.width + (j + self.kl - i)]
    }

    pub fn solve_in_place(&self, rhs: &mut CMat) {
        let n = self.n;
        for col in 0..rhs.ncols() {
            let mut b: Vec<C64> = (0..n).map(|i| rhs[(self.perm[i], col)]).collect();
            for k in 0..n {
                b.swap(k, self.piv[k]);
                let bk = b[k];
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
            for i in (0..n).rev() {
                let mut acc = b[i];
                for j in i + 1..=(i + self.span).min(n - 1) {
                    acc -= self.at(i, j) * b[j];
                }
                b[i] = acc / self.at(i, i);
            }
            for i in 0..n {
                rhs[(self.perm[i], col)] = b[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complexify;

    fn scrambled_tridiagonal(n: usize) -> CsrMatrix {
        // tridiagonal in a shuffled numbering so RCM has work to do
        let p: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((p[i], p[i], -2.0 - 0.1 * i as f64));
            if i + 1 < n {
                t.push((p[i], p[i + 1], 1.0));
                t.push((p[i + 1], p[i], 0.7));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn rcm_recovers_narrow_band() {
        let a = scrambled_tridiagonal(50);
        let lu = BandedLu::factor(&a, C64::new(1.0, 0.0), C64::new(0.3, 0.2)).unwrap();
        let (kl, ku) = lu.bandwidths();
        assert!(kl + ku <= 2, "band {kl}+{ku}");
    }

    #[test]
    fn banded_solve_matches_dense() {
        let a = scrambled_tridiagonal(50);
        let sigma = C64::new(0.5, -1.0);
        let tau = C64::new(2.0, 0.5);
        let lu = BandedLu::factor(&a, sigma, tau).unwrap();
        assert!(!lu.is_singular());
        let dense = CMat::identity(50, 50) * sigma - complexify(&a.to_dense()) * tau;
        let rhs = CMat::from_fn(50, 2, |i, j| C64::new(i as f64 - 3.0, j as f64 + 1.0));
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let res = (&dense * &x - &rhs).norm() / rhs.norm();
        assert!(res < 1e-13, "{res}");
    }

    #[test]
    fn singular_band_detected() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 4.0)]);
        let lu = BandedLu::factor(&a, C64::new(2.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!(lu.is_singular());
    }

    #[test]
    fn duplicates_summed_zeros_dropped() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.to_dense()[(0, 1)], 3.0);
    }
}

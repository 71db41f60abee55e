//! Sparse matrices (CSC), fill-reducing ordering, and an up-looking LDL^T
//! factorization shared by the floating approximation phase (f64 scalars,
//! signed quasidefinite regularization) and the certification phase
//! (interval scalars, positive-pivot Cholesky-style certificates).

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::par;

/// Compressed sparse column matrix.
#[derive(Clone, Debug)]
pub struct Csc<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Copy + Default + std::ops::AddAssign> Csc<T> {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Self {
        let mut per_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); ncols];
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            per_col[c].push((r, v));
        }
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        for col in per_col.iter_mut() {
            col.sort_by_key(|&(r, _)| r);
            let mut i = 0;
            while i < col.len() {
                let r = col[i].0;
                let mut v = T::default();
                while i < col.len() && col[i].0 == r {
                    v += col[i].1;
                    i += 1;
                }
                row_idx.push(r);
                vals.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Csc { nrows, ncols, col_ptr, row_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            count[r + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let mut col_ptr = count.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut vals = vec![T::default(); self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.row_idx[p];
                let dst = col_ptr[r];
                row_idx[dst] = j;
                vals[dst] = self.vals[p];
                col_ptr[r] += 1;
            }
        }
        Csc { nrows: self.ncols, ncols: self.nrows, col_ptr: count, row_idx, vals }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => self.vals[lo + k],
            Err(_) => T::default(),
        }
    }

    /// Symmetric permutation B = P A P^T with `perm[new] = old`.
    pub fn permute_sym(&self, perm: &[usize]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Csc::from_triplets(
            n,
            n,
            (0..n).flat_map(|j| {
                let inv = &inv;
                (self.col_ptr[j]..self.col_ptr[j + 1])
                    .map(move |p| (inv[self.row_idx[p]], inv[j], self.vals[p]))
            }),
        )
    }
}

impl Csc<f64> {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[self.row_idx[p]] += self.vals[p] * xj;
                }
            }
        }
    }

    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.ncols {
            let mut s = 0.0;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.vals[p] * x[self.row_idx[p]];
            }
            y[j] = s;
        }
    }

    /// Dense product A * X, column-parallel.
    pub fn mul_dense(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        assert_eq!(self.ncols, x.nrows());
        let n = x.ncols();
        let cols: Vec<Vec<f64>> = par::map_indexed(n, |c| {
            let mut y = vec![0.0; self.nrows];
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                if xj != 0.0 {
                    for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                        y[self.row_idx[p]] += self.vals[p] * xj;
                    }
                }
            }
            y
        });
        nalgebra::DMatrix::from_fn(self.nrows, n, |i, c| cols[c][i])
    }

    pub fn to_interval(&self) -> crate::interval::IvSparse {
        crate::interval::IvSparse {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            vals: self.vals.iter().map(|&v| Interval::point(v)).collect(),
            symmetric: false,
        }
    }
}

/// Scalars factorable by the shared up-looking LDL^T kernel.
pub trait LdlScalar: Copy + Default + std::ops::AddAssign {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Result<Self>;
    /// Acceptable pivot? (nonzero for f64, certified positive for intervals)
    fn pivot_ok(self) -> bool;
}

impl LdlScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Result<Self> {
        Ok(self / o)
    }
    fn pivot_ok(self) -> bool {
        self != 0.0 && self.is_finite()
    }
}

impl LdlScalar for Interval {
    fn zero() -> Self {
        Interval::ZERO
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Result<Self> {
        self.div_checked(&o)
    }
    fn pivot_ok(self) -> bool {
        self.lo > 0.0
    }
}

/// LDL^T factor of a symmetrically permuted matrix.
pub struct LdlFactor<T> {
    pub n: usize,
    pub perm: Vec<usize>,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub vals: Vec<T>,
    pub diag: Vec<T>,
}

/// Up-looking LDL^T of `P (A + diag(reg)) P^T`; `a` must be structurally
/// symmetric with both triangles stored. In certification mode (intervals)
/// a non-positive pivot aborts with `VerificationFailed`.
pub fn ldl_factorize<T: LdlScalar>(
    a: &Csc<T>,
    perm: &[usize],
    reg: Option<&[T]>,
) -> Result<LdlFactor<T>> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let ap = a.permute_sym(perm);
    let reg_p: Option<Vec<T>> = reg.map(|r| perm.iter().map(|&old| r[old]).collect());

    // Elimination tree from the upper triangle of the permuted matrix.
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for p in ap.col_ptr[k]..ap.col_ptr[k + 1] {
            let mut i = ap.row_idx[p];
            while i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }

    // Pass 1: column counts of L via the row-pattern walk.
    let mut flag = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for p in ap.col_ptr[k]..ap.col_ptr[k + 1] {
            let mut i = ap.row_idx[p];
            while i < k && flag[i] != k {
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for i in 0..n {
        col_ptr[i + 1] = col_ptr[i] + lnz[i];
    }
    let total = col_ptr[n];
    let mut row_idx = vec![0usize; total];
    let mut vals = vec![T::zero(); total];
    let mut diag = vec![T::zero(); n];
    let mut fill = vec![0usize; n];

    // Pass 2: numeric.
    let mut y = vec![T::zero(); n];
    let mut pattern = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut flag = vec![usize::MAX; n];
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        let mut dk = reg_p.as_ref().map_or(T::zero(), |r| r[k]);
        for p in ap.col_ptr[k]..ap.col_ptr[k + 1] {
            let i = ap.row_idx[p];
            if i > k {
                continue;
            }
            if i == k {
                dk = dk.add(ap.vals[p]);
                continue;
            }
            y[i] = y[i].add(ap.vals[p]);
            let mut len = 0;
            let mut j = i;
            while flag[j] != k {
                stack[len] = j;
                len += 1;
                flag[j] = k;
                j = parent[j];
            }
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = stack[len];
            }
        }
        for s in top..n {
            let i = pattern[s];
            let yi = y[i];
            y[i] = T::zero();
            for q in col_ptr[i]..col_ptr[i] + fill[i] {
                y[row_idx[q]] = y[row_idx[q]].sub(vals[q].mul(yi));
            }
            let lki = yi.div(diag[i]).map_err(|_| {
                Error::VerificationFailed(format!("pivot {i} not invertible in LDL"))
            })?;
            dk = dk.sub(lki.mul(yi));
            let q = col_ptr[i] + fill[i];
            row_idx[q] = k;
            vals[q] = lki;
            fill[i] += 1;
        }
        if !dk.pivot_ok() {
            return Err(Error::VerificationFailed(format!(
                "LDL pivot {k} of {n} not acceptable"
            )));
        }
        diag[k] = dk;
    }

    Ok(LdlFactor { n, perm: perm.to_vec(), col_ptr, row_idx, vals, diag })
}

impl LdlFactor<f64> {
    /// Solve in place for one right-hand side.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[new] = b[old];
        }
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    x[self.row_idx[p]] -= self.vals[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.diag[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s -= self.vals[p] * x[self.row_idx[p]];
            }
            x[j] = s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    /// Solve a dense block of right-hand sides, panel-parallel.
    pub fn solve_mat(&self, b: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        let ncols = b.ncols();
        let cols: Vec<Vec<f64>> = par::map_indexed(ncols, |c| {
            let mut col: Vec<f64> = b.column(c).iter().cloned().collect();
            self.solve(&mut col);
            col
        });
        nalgebra::DMatrix::from_fn(b.nrows(), ncols, |i, c| cols[c][i])
    }
}

/// Recursive coordinate-bisection nested dissection. `coords[i]` is a point
/// associated with unknown `i`; mesh-born unknowns use entity barycenters.
/// Returns `perm` with `perm[new] = old`.
pub fn nd_order(pattern: &Csc<f64>, coords: &[[f64; 3]]) -> Vec<usize> {
    assert_eq!(pattern.nrows, pattern.ncols);
    let n = pattern.nrows;
    assert_eq!(coords.len(), n);
    let mut perm = Vec::with_capacity(n);
    let mut side = vec![0u8; n];
    let all: Vec<usize> = (0..n).collect();
    nd_recurse(pattern, coords, all, &mut side, &mut perm);
    debug_assert_eq!(perm.len(), n);
    perm
}

fn nd_recurse(
    pattern: &Csc<f64>,
    coords: &[[f64; 3]],
    mut set: Vec<usize>,
    side: &mut [u8],
    out: &mut Vec<usize>,
) {
    const LEAF: usize = 64;
    if set.len() <= LEAF {
        set.sort_unstable();
        out.extend_from_slice(&set);
        return;
    }
    // widest axis
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &set {
        for a in 0..3 {
            lo[a] = lo[a].min(coords[i][a]);
            hi[a] = hi[a].max(coords[i][a]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap()).unwrap();
    set.sort_by(|&a, &b| {
        coords[a][axis]
            .partial_cmp(&coords[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let half = set.len() / 2;
    let (left, right) = set.split_at(half);
    for &i in left {
        side[i] = 1;
    }
    for &i in right {
        side[i] = 2;
    }
    // separator: right-side vertices adjacent to the left side
    let mut sep = Vec::new();
    let mut right_keep = Vec::new();
    for &i in right {
        let mut touches_left = false;
        for p in pattern.col_ptr[i]..pattern.col_ptr[i + 1] {
            if side[pattern.row_idx[p]] == 1 {
                touches_left = true;
                break;
            }
        }
        if touches_left {
            sep.push(i);
        } else {
            right_keep.push(i);
        }
    }
    let left: Vec<usize> = left.to_vec();
    for &i in &left {
        side[i] = 0;
    }
    for &i in &right_keep {
        side[i] = 0;
    }
    for &i in &sep {
        side[i] = 0;
    }
    if sep.len() == set.len() {
        // pathological; emit as leaf
        let mut s = sep;
        s.sort_unstable();
        out.extend_from_slice(&s);
        return;
    }
    nd_recurse(pattern, coords, left, side, out);
    nd_recurse(pattern, coords, right_keep, side, out);
    sep.sort_unstable();
    out.extend_from_slice(&sep);
}

pub fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn laplacian_1d(n: usize) -> Csc<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Csc::from_triplets(n, n, t)
    }

    #[test]
    fn ldl_solves_spd() {
        let n = 50;
        let a = laplacian_1d(n);
        let perm = identity_perm(n);
        let f = ldl_factorize(&a, &perm, None).unwrap();
        let mut b = vec![1.0; n];
        f.solve(&mut b);
        let mut r = vec![0.0; n];
        a.matvec(&b, &mut r);
        for v in r {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ldl_quasidefinite_saddle() {
        // [[I, B^T], [B, -reg]] factors with signed regularization under any order
        let t = vec![
            (0usize, 0usize, 1.0),
            (1, 1, 1.0),
            (2, 0, 1.0),
            (2, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
        ];
        let a = Csc::from_triplets(3, 3, t);
        let reg = vec![1e-10, 1e-10, -1e-10];
        let perm = vec![2usize, 0, 1]; // saddle row first: needs regularization
        let f = ldl_factorize(&a, &perm, Some(&reg)).unwrap();
        let mut b = vec![1.0, 2.0, 1.0];
        f.solve(&mut b);
        // exact solution of [[1,0,1],[0,1,1],[1,1,0]] x = (1,2,1): x = (0,1,1)
        assert!((b[0] - 0.0).abs() < 1e-6 && (b[1] - 1.0).abs() < 1e-6 && (b[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn interval_ldl_certifies_spd() {
        let n = 30;
        let a = laplacian_1d(n);
        let ai = Csc::<Interval> {
            nrows: n,
            ncols: n,
            col_ptr: a.col_ptr.clone(),
            row_idx: a.row_idx.clone(),
            vals: a.vals.iter().map(|&v| Interval::point(v)).collect(),
        };
        let perm = identity_perm(n);
        assert!(ldl_factorize(&ai, &perm, None).is_ok());
        // shifted below the smallest eigenvalue it must fail
        let shift = -4.1; // eigenvalues of this Laplacian are in (0, 4)
        let mut t: Vec<(usize, usize, Interval)> = Vec::new();
        for j in 0..n {
            for p in ai.col_ptr[j]..ai.col_ptr[j + 1] {
                t.push((ai.row_idx[p], j, ai.vals[p]));
            }
            t.push((j, j, Interval::point(shift)));
        }
        let shifted = Csc::<Interval>::from_triplets(n, n, t);
        assert!(ldl_factorize(&shifted, &perm, None).is_err());
    }

    #[test]
    fn nd_ordering_valid_permutation() {
        let n = 200;
        let a = laplacian_1d(n);
        let coords: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let perm = nd_order(&a, &coords);
        let mut seen = vec![false; n];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
        let f = ldl_factorize(&a, &perm, None).unwrap();
        let mut b: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
        let orig = b.clone();
        f.solve(&mut b);
        let mut r = vec![0.0; n];
        a.matvec(&b, &mut r);
        for (x, y) in r.iter().zip(&orig) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn solve_mat_matches_single() {
        let n = 40;
        let a = laplacian_1d(n);
        let f = ldl_factorize(&a, &identity_perm(n), None).unwrap();
        let b = DMatrix::from_fn(n, 3, |i, j| ((i + j) % 7) as f64);
        let x = f.solve_mat(&b);
        for j in 0..3 {
            let mut col: Vec<f64> = b.column(j).iter().cloned().collect();
            f.solve(&mut col);
            for i in 0..n {
                assert_eq!(x[(i, j)], col[i]);
            }
        }
    }
}

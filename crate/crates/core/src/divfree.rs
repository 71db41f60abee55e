//! Verified basis enclosure for the implicitly constrained divergence-free
//! space: the kernel of the assembled divergence matrix.
//!
//! The pressure test space contains the global constant, whose row block is
//! dependent (the divergence of any velocity with zero boundary trace has
//! zero mean), so one row is dropped before a square pivot block B1 is
//! selected by a partially pivoted factorization of the midpoint matrix.
//! A Krawczyk enclosure of `B1^-1 B2` then yields an interval matrix Z
//! whose columns enclose an exact kernel basis: every point matrix in the
//! input box admits the kernel basis `[-B1^-1 B2; I]`, and the success of
//! the enclosure certifies that B1 is regular for all of them, pinning the
//! kernel dimension.

use crate::error::{Error, Result};
use crate::interval::{solve_enclosure_mat, Interval, IvMat, IvSparse};
use crate::linalg::{dense, midrad};
use nalgebra::DMatrix;

pub struct KernelBasis {
    /// Velocity dofs (columns of the constraint matrix).
    pub nu: usize,
    /// Kernel dimension.
    pub dim: usize,
    /// nu x dim enclosure of an exact kernel basis.
    pub z: IvMat,
    /// Columns carrying the identity block, in order.
    pub free_cols: Vec<usize>,
    /// Columns of the pivot block.
    pub dep_cols: Vec<usize>,
}

/// Build the kernel enclosure of a constraint matrix whose rows include one
/// redundant combination (`drop_row`), certified dependent by the caller's
/// structure (for divergence constraints: the global-constant pressure row).
pub fn kernel_basis(b_full: &IvSparse, drop_row: usize) -> Result<KernelBasis> {
    let nrows = b_full.nrows - 1;
    let nu = b_full.ncols;
    if nrows >= nu {
        return Err(Error::Space(format!(
            "constraint matrix has no kernel margin: {nrows} rows vs {nu} cols"
        )));
    }
    let dim = nu - nrows;

    // dense midpoint of the reduced matrix, rows without drop_row
    let mut bmid = DMatrix::zeros(nrows, nu);
    for j in 0..nu {
        for k in b_full.col_ptr[j]..b_full.col_ptr[j + 1] {
            let r = b_full.row_idx[k];
            if r == drop_row {
                continue;
            }
            let rr = if r > drop_row { r - 1 } else { r };
            bmid[(rr, j)] = b_full.vals[k].mid();
        }
    }

    // pivot columns from a partially pivoted LU of B^T
    let lu = bmid.transpose().lu();
    // apply the row permutation of B^T to the index list
    let mut idx = DMatrix::from_fn(nu, 1, |i, _| i as f64);
    lu.p().permute_rows(&mut idx);
    let order: Vec<usize> = (0..nu).map(|i| idx[(i, 0)] as usize).collect();
    let mut dep_cols: Vec<usize> = order[..nrows].to_vec();
    let mut free_cols: Vec<usize> = order[nrows..].to_vec();
    dep_cols.sort_unstable();
    free_cols.sort_unstable();

    // interval blocks
    let get_reduced = |i: usize, j: usize| -> Interval {
        // entry of the reduced (row-dropped) interval matrix
        let r = if i >= drop_row { i + 1 } else { i };
        b_full.get(r, j)
    };
    let b1 = IvMat::from_fn(nrows, nrows, |i, j| get_reduced(i, dep_cols[j]));
    let b2 = IvMat::from_fn(nrows, dim, |i, j| get_reduced(i, free_cols[j]));

    let x = solve_enclosure_mat(&b1, &b2).map_err(|e| {
        Error::VerificationFailed(format!("divergence pivot block not certifiably regular: {e}"))
    })?;

    let mut z = IvMat::zeros(nu, dim);
    for (i, &c) in dep_cols.iter().enumerate() {
        for j in 0..dim {
            z[(c, j)] = -x[(i, j)];
        }
    }
    for (j, &c) in free_cols.iter().enumerate() {
        z[(c, j)] = Interval::ONE;
    }
    Ok(KernelBasis { nu, dim, z, free_cols, dep_cols })
}

impl KernelBasis {
    pub fn z_mid(&self) -> DMatrix<f64> {
        self.z.mid()
    }

    /// Dense congruence `Z^T S Z` for a sparse symmetric interval matrix.
    pub fn reduce_sym(&self, s: &IvSparse) -> IvMat {
        let sz = s.mul_dense(&self.z);
        midrad::iv_gemm_tn(&self.z, &sz).hull_sym()
    }

    /// Dense reduction `Z^T S Z` without the symmetry hull.
    pub fn reduce(&self, s: &IvSparse) -> IvMat {
        let sz = s.mul_dense(&self.z);
        midrad::iv_gemm_tn(&self.z, &sz)
    }

    /// `Z t` for interval coefficients `t` in kernel coordinates.
    pub fn expand(&self, t: &[Interval]) -> Vec<Interval> {
        assert_eq!(t.len(), self.dim);
        let tm = IvMat { nrows: self.dim, ncols: 1, data: t.to_vec() };
        midrad::iv_gemm(&self.z, &tm).data
    }

    /// `Z^T v`.
    pub fn restrict(&self, v: &[Interval]) -> Vec<Interval> {
        assert_eq!(v.len(), self.nu);
        let vm = IvMat { nrows: self.nu, ncols: 1, data: v.to_vec() };
        midrad::iv_gemm_tn(&self.z, &vm).data
    }

    /// Least-squares kernel coordinates of a floating vector (projection in
    /// the euclidean metric of the identity block: free components copied).
    pub fn float_coords(&self, v: &[f64]) -> Vec<f64> {
        self.free_cols.iter().map(|&c| v[c]).collect()
    }

    /// Floating expansion `mid(Z) t`.
    pub fn expand_f64(&self, t: &[f64]) -> Vec<f64> {
        let zm = self.z_mid();
        let tv = DMatrix::from_column_slice(self.dim, 1, t);
        let out = dense::gemm(&zm, &tv);
        out.column(0).iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::iv_dot;

    #[test]
    fn kernel_of_small_constraint() {
        // rows: [1 1 0 0; 0 0 1 -1; 1 1 1 -1(sum of both -> dependent)]
        let t = vec![
            (0usize, 0usize, Interval::ONE),
            (0, 1, Interval::ONE),
            (1, 2, Interval::ONE),
            (1, 3, -Interval::ONE),
            (2, 0, Interval::ONE),
            (2, 1, Interval::ONE),
            (2, 2, Interval::ONE),
            (2, 3, -Interval::ONE),
        ];
        let b = IvSparse::from_triplets(3, 4, t);
        let kb = kernel_basis(&b, 2).unwrap();
        assert_eq!(kb.dim, 2);
        // every kernel column must annihilate every original row
        for j in 0..kb.dim {
            let col: Vec<Interval> = (0..kb.nu).map(|i| kb.z[(i, j)]).collect();
            for r in 0..3 {
                let row: Vec<Interval> = (0..4).map(|c| b.get(r, c)).collect();
                let dot = iv_dot(&row, &col);
                assert!(dot.contains(0.0), "row {r} col {j}: {dot}");
            }
        }
    }

    #[test]
    fn full_rank_rejected() {
        // 2x2 identity with a dependent third row of zeros has no margin
        let t = vec![
            (0usize, 0usize, Interval::ONE),
            (1, 1, Interval::ONE),
        ];
        let b = IvSparse::from_triplets(3, 2, t);
        assert!(kernel_basis(&b, 2).is_err());
    }
}

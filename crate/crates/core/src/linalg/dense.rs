//! Dense f64 helpers: panel-parallel products on top of nalgebra's gemm and
//! a few factorization conveniences used by the approximation phases.

use crate::par;
use nalgebra::DMatrix;

/// Column-panel width for parallel products.
const PANEL: usize = 384;

/// C = A * B with deterministic panel-parallel evaluation.
pub fn gemm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let (m, n) = (a.nrows(), b.ncols());
    if m == 0 || n == 0 || a.ncols() == 0 {
        return DMatrix::zeros(m, n);
    }
    if par::is_sequential() || n <= PANEL {
        return a * b;
    }
    let panels: Vec<DMatrix<f64>> = par::map_indexed(n.div_ceil(PANEL), |p| {
        let j0 = p * PANEL;
        let w = PANEL.min(n - j0);
        a * b.columns(j0, w)
    });
    let mut c = DMatrix::zeros(m, n);
    for (p, panel) in panels.iter().enumerate() {
        c.columns_mut(p * PANEL, panel.ncols()).copy_from(panel);
    }
    c
}

/// C = A^T * B, panel parallel.
pub fn gemm_tn(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let (m, n) = (a.ncols(), b.ncols());
    if m == 0 || n == 0 || a.nrows() == 0 {
        return DMatrix::zeros(m, n);
    }
    if par::is_sequential() || n <= PANEL {
        return a.transpose() * b;
    }
    let at = a.transpose();
    let panels: Vec<DMatrix<f64>> = par::map_indexed(n.div_ceil(PANEL), |p| {
        let j0 = p * PANEL;
        let w = PANEL.min(n - j0);
        &at * b.columns(j0, w)
    });
    let mut c = DMatrix::zeros(m, n);
    for (p, panel) in panels.iter().enumerate() {
        c.columns_mut(p * PANEL, panel.ncols()).copy_from(panel);
    }
    c
}

pub fn abs_mat(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(f64::abs)
}

/// Entrywise sum with upward one-ulp bumps, so the result dominates the
/// exact entrywise sum.
pub fn add_up(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + b[(i, j)]).next_up())
}

/// Approximate inverse via LU; returns None when the factorization is
/// numerically singular. Quality is refined by the verified layer, so no
/// accuracy claim is needed here.
pub fn approx_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().lu().try_inverse()
}

pub fn solve_lu(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let a = DMatrix::from_fn(40, 30, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let b = DMatrix::from_fn(30, 900, |i, j| ((i * 3 + j) % 17) as f64 * 0.25);
        let c1 = gemm(&a, &b);
        crate::par::force_sequential(true);
        let c2 = gemm(&a, &b);
        crate::par::force_sequential(false);
        assert_eq!(c1, c2);
    }
}

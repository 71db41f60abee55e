//! Fast enclosure of interval matrix products.
//!
//! The product of two interval matrices is computed from midpoint/radius
//! parts with four floating gemms; the radius picks up an explicit
//! `O(k·u)`-scaled term that dominates both the spread of the boxes and the
//! accumulated rounding error of the midpoint product, for any summation
//! order the underlying gemm uses. This keeps large congruence products at
//! floating-point speed while staying containment-true.

use crate::interval::{Interval, IvMat};
use crate::linalg::dense;
use nalgebra::DMatrix;

const U: f64 = f64::EPSILON * 0.5;

/// Radius inflation covering gemm rounding for inner dimension `k`.
fn gamma_factor(k: usize) -> f64 {
    8.0 * (k as f64 + 2.0) * U
}

fn absolute_slack(k: usize) -> f64 {
    (k as f64 + 2.0) * 1e-290
}

/// Enclosure of `{ A*B : A in [A], B in [B] }`.
pub fn iv_gemm(a: &IvMat, b: &IvMat) -> IvMat {
    assert_eq!(a.ncols, b.nrows);
    let k = a.ncols;
    let am = a.mid();
    let ar = a.rad();
    let bm = b.mid();
    let br = b.rad();
    let a_point = ar.amax() == 0.0;
    let b_point = br.amax() == 0.0;

    let cm = dense::gemm(&am, &bm);
    let am_abs = dense::abs_mat(&am);
    let bm_abs = dense::abs_mat(&bm);
    // Error-dominating term for the midpoint gemm.
    let p1 = dense::gemm(&am_abs, &bm_abs);
    // Spread terms.
    let p2 = if b_point {
        None
    } else {
        Some(dense::gemm(&dense::add_up(&am_abs, &ar), &br))
    };
    let p3 = if a_point {
        None
    } else {
        Some(dense::gemm(&ar, &bm_abs))
    };

    let g = gamma_factor(k);
    let eta = absolute_slack(k);
    let cr = DMatrix::from_fn(cm.nrows(), cm.ncols(), |i, j| {
        let mut s = g * p1[(i, j)];
        if let Some(p2) = &p2 {
            s += p2[(i, j)];
        }
        if let Some(p3) = &p3 {
            s += p3[(i, j)];
        }
        let s = (s * (1.0 + g) + eta).next_up().next_up();
        debug_assert!(s >= 0.0);
        s
    });
    IvMat::from_mid_rad(&cm, &cr)
}

/// Enclosure of `A^T * B`.
pub fn iv_gemm_tn(a: &IvMat, b: &IvMat) -> IvMat {
    // Transposing the box transposes every member matrix exactly.
    iv_gemm(&a.transpose(), b)
}

/// Congruence `X^T * S * X` enclosure, with the inner product symmetrized:
/// the exact congruence of a symmetric [S] member is symmetric, so the
/// intersection-hull with the transpose is still an enclosure.
pub fn iv_congruence(x: &IvMat, s: &IvMat) -> IvMat {
    let sx = iv_gemm(s, x);
    let out = iv_gemm_tn(x, &sx);
    out.hull_sym()
}

/// Interval matrix times interval vector via the same midrad path.
pub fn iv_gemv(a: &IvMat, x: &[Interval]) -> Vec<Interval> {
    let xm = IvMat { nrows: x.len(), ncols: 1, data: x.to_vec() };
    iv_gemm(a, &xm).data
}

trait AMax {
    fn amax(&self) -> f64;
}

impl AMax for DMatrix<f64> {
    fn amax(&self) -> f64 {
        self.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_from_f64, Rat};
    use num_traits::Zero;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Exact rational product of point matrices sampled inside the boxes
    /// must land inside the midrad enclosure.
    #[test]
    fn contains_exact_products() {
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..20 {
            let (m, k, n) = (5, 7, 4);
            let a = IvMat::from_fn(m, k, |_, _| {
                let c: f64 = rng.gen_range(-2.0..2.0);
                let r: f64 = rng.gen_range(0.0..0.01);
                Interval::new(c - r, c + r)
            });
            let b = IvMat::from_fn(k, n, |_, _| {
                let c: f64 = rng.gen_range(-2.0..2.0);
                let r: f64 = rng.gen_range(0.0..0.01);
                Interval::new(c - r, c + r)
            });
            let c = iv_gemm(&a, &b);
            // sample endpoints / midpoints as the point selection
            let pick = |iv: Interval, which: usize| match which {
                0 => iv.lo,
                1 => iv.hi,
                _ => iv.mid(),
            };
            let wa = trial % 3;
            let wb = (trial / 3) % 3;
            for i in 0..m {
                for j in 0..n {
                    let mut s = Rat::zero();
                    for l in 0..k {
                        s += rat_from_f64(pick(a[(i, l)], wa)) * rat_from_f64(pick(b[(l, j)], wb));
                    }
                    let enc = c[(i, j)];
                    assert!(
                        crate::rat::cmp_rat_f64(&s, enc.lo) != std::cmp::Ordering::Less
                            && crate::rat::cmp_rat_f64(&s, enc.hi) != std::cmp::Ordering::Greater,
                        "exact product escaped enclosure"
                    );
                }
            }
        }
    }

    #[test]
    fn point_product_is_tight() {
        let a = IvMat::from_fn(3, 3, |i, j| Interval::point((i + j) as f64));
        let b = IvMat::identity(3);
        let c = iv_gemm(&a, &b);
        for i in 0..3 {
            for j in 0..3 {
                assert!(c[(i, j)].contains((i + j) as f64));
                assert!(c[(i, j)].width() < 1e-12);
            }
        }
    }
}

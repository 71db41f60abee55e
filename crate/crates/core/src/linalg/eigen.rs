//! Floating-point eigenvalue approximation: dense pencil solves for modest
//! sizes and a generalized Lanczos iteration (full reorthogonalization) for
//! sparse operators. These produce candidate values and vectors only; all
//! rigor is added afterwards by the certification layer.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// All eigenvalues (ascending) and vectors of the pencil A x = lambda B x,
/// A symmetric, B symmetric positive definite; dense path.
pub fn sym_pencil_eigs_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solve("pencil B not positive definite in floating point".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Solve("triangular solve failed".into()))?;
    let w = &linv * a * linv.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let se = w.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    // pencil eigenvectors: x = L^-T y
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let y = se.eigenvectors.column(i).into_owned();
        let x = linv.transpose() * y;
        vecs.set_column(c, &x);
    }
    Ok((values, vecs))
}

pub struct LanczosResult {
    /// Ritz values of the operator, ascending.
    pub values: Vec<f64>,
    /// Ritz vectors matching `values`.
    pub vectors: Vec<Vec<f64>>,
}

/// Lanczos iteration for an operator self-adjoint with respect to the inner
/// product `minner`. Full reorthogonalization; deterministic seeded start.
pub fn lanczos_sym(
    n: usize,
    steps: usize,
    seed: u64,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    minner: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<LanczosResult> {
    let mut rng = StdRng::seed_from_u64(seed);
    let steps = steps.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();

    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // one operator application pushes the start into the operator's range
    // (for constrained saddle operators this lands in the feasible subspace)
    v = apply(&v);
    let nrm = minner(&v, &v).max(0.0).sqrt();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::Solve("lanczos start vector degenerate".into()));
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    basis.push(v);

    for j in 0..steps {
        let mut w = apply(&basis[j]);
        let alpha = minner(&w, &basis[j]);
        alphas.push(alpha);
        for (i, b) in basis.iter().enumerate() {
            let c = if i == j {
                alpha
            } else if i + 1 == j {
                betas[i]
            } else {
                0.0
            };
            if c != 0.0 {
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        // full reorthogonalization, twice for safety
        for _ in 0..2 {
            for b in &basis {
                let c = minner(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = minner(&w, &w).max(0.0).sqrt();
        if !beta.is_finite() {
            return Err(Error::Solve("lanczos breakdown (non-finite beta)".into()));
        }
        if beta < 1e-14 || j + 1 == steps {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }

    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let se = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let y = se.eigenvectors.column(i);
            let mut x = vec![0.0; n];
            for (k, b) in basis.iter().enumerate() {
                let c = y[k];
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
            }
            x
        })
        .collect();
    Ok(LanczosResult { values, vectors })
}

/// Preconditioned BiCGStab for nonsymmetric sparse systems.
/// `apply` is the operator, `precond` an approximate inverse application.
pub fn bicgstab(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let norm = |x: &[f64]| dot(x, x).sqrt();
    let bnorm = norm(b).max(1e-300);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for _ in 0..max_iter {
        if norm(&r) / bnorm < tol {
            return Ok(x);
        }
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-290 {
            return Err(Error::Solve("bicgstab breakdown (rho)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = apply(&ph);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        if norm(&s) / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        let sh = precond(&s);
        let t = apply(&sh);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Solve("bicgstab breakdown (t)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < 1e-290 {
            return Err(Error::Solve("bicgstab breakdown (omega)".into()));
        }
    }
    let res = norm(&r) / bnorm;
    if res < tol * 100.0 {
        Ok(x)
    } else {
        Err(Error::Solve(format!(
            "bicgstab did not converge: relative residual {res:.3e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_pencil_analytic() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::identity(2, 2);
        let (vals, _) = sym_pencil_eigs_dense(&a, &b).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_finds_extremes() {
        // operator = diagonal matrix, euclidean inner product
        let n = 60;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let res = lanczos_sym(
            n,
            40,
            7,
            |x| x.iter().zip(&d).map(|(a, b)| a * b).collect(),
            |x, y| x.iter().zip(y).map(|(a, b)| a * b).sum(),
        )
        .unwrap();
        let max = res.values.last().unwrap();
        assert!((max - n as f64).abs() < 1e-6, "max ritz {max}");
    }

    #[test]
    fn bicgstab_solves() {
        let n = 30;
        // tridiagonal nonsymmetric
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = 3.0 * x[i];
                    if i > 0 {
                        s -= 1.2 * x[i - 1];
                    }
                    if i + 1 < n {
                        s -= 0.7 * x[i + 1];
                    }
                    s
                })
                .collect()
        };
        let b = vec![1.0; n];
        let x = bicgstab(n, apply, |r| r.to_vec(), &b, 1e-12, 200).unwrap();
        let r = apply(&x);
        for i in 0..n {
            assert!((r[i] - 1.0).abs() < 1e-9);
        }
    }
}

//! Approximate solution of the stationary mixed system and its verified
//! divergence-free correction.
//!
//! Newton's iteration runs in ordinary floating point (sparse quasidefinite
//! LDL preconditioning, BiCGStab for the nonsymmetric linearizations); no
//! rigor is claimed there. Rigor enters with the correction: the energy
//! projection onto the kernel enclosure produces an interval field that
//! contains an exactly divergence-free member, and every reported norm is
//! evaluated over that box.

use crate::divfree::KernelBasis;
use crate::error::{Error, Result};
use crate::interval::{solve_enclosure, Interval, IvMat, IvSparse};
use crate::linalg::{eigen, sparse};
use crate::mesh::{TetMesh, Topology};
use crate::par;
use crate::polytet::{poly_grad, sup_norm_bound, BernsteinPoly};
use crate::spaces::{
    self, assemble_convection, assemble_divergence, assemble_load, assemble_scalar_mass,
    assemble_scalar_stiffness, gram, Bc, PolySpec, ScalarSpace, SpaceDescriptor, VectorField,
};

/// Meshes, spaces and the static interval matrices of the mixed problem.
pub struct MixedSystem {
    pub mesh: TetMesh,
    pub topo: Topology,
    pub vel: ScalarSpace,
    pub pres: ScalarSpace,
    /// Vector stiffness (3n x 3n, reduced dofs, component-major).
    pub a_u: IvSparse,
    /// Vector mass.
    pub m_u: IvSparse,
    /// Divergence rows over the full pressure basis.
    pub b: IvSparse,
    pub n_u: usize,
    pub n_p: usize,
}

impl MixedSystem {
    pub fn build(mesh: TetMesh, topo: Topology, k: u8, d: u8) -> Result<MixedSystem> {
        let spaces::Space::Scalar(vel) = spaces::build_space(
            &mesh,
            &topo,
            &SpaceDescriptor::lagrange(k, Bc::HomogeneousDirichlet, 3),
        )?
        else {
            unreachable!()
        };
        let spaces::Space::Scalar(pres) =
            spaces::build_space(&mesh, &topo, &SpaceDescriptor::discontinuous(d, Bc::ZeroMean, 1))?
        else {
            unreachable!()
        };
        let nred = vel.n_reduced;
        let stiff = assemble_scalar_stiffness::<Interval>(&mesh, &vel);
        let mass = assemble_scalar_mass::<Interval>(&mesh, &vel);
        let expand = |t: &[(usize, usize, Interval)]| -> IvSparse {
            let mut out = Vec::with_capacity(3 * t.len());
            for &(i, j, v) in t {
                for c in 0..3 {
                    out.push((c * nred + i, c * nred + j, v));
                }
            }
            IvSparse::from_triplets(3 * nred, 3 * nred, out)
        };
        let a_u = expand(&stiff);
        let m_u = expand(&mass);
        let b = IvSparse::from_triplets(
            pres.n_full,
            3 * nred,
            assemble_divergence::<Interval>(&mesh, &vel, &pres),
        );
        Ok(MixedSystem { n_u: 3 * nred, n_p: pres.n_full, mesh, topo, vel, pres, a_u, m_u, b })
    }

    /// Kernel enclosure of the divergence constraint. The dropped row is
    /// the constant-pressure combination: summing the coefficient rows of
    /// one element's Bernstein basis reproduces the elementwise integral,
    /// and the total integral of a divergence vanishes on the
    /// zero-boundary velocity space.
    pub fn kernel(&self) -> Result<KernelBasis> {
        crate::divfree::kernel_basis(&self.b, self.n_p - 1)
    }
}

/// Quasidefinite LDL of the (Stokes-like) saddle matrix, used directly for
/// symmetric solves and as a preconditioner for nonsymmetric ones.
pub struct SaddleSolver {
    pub n_u: usize,
    pub n_p: usize,
    mat: sparse::Csc<f64>,
    fact: sparse::LdlFactor<f64>,
}

impl SaddleSolver {
    /// Assemble `[[s A, B^T], [B, 0]]` with signed regularization.
    pub fn new(ms: &MixedSystem, scale_a: f64) -> Result<SaddleSolver> {
        let n = ms.n_u + ms.n_p;
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for j in 0..ms.a_u.ncols {
            for k in ms.a_u.col_ptr[j]..ms.a_u.col_ptr[j + 1] {
                t.push((ms.a_u.row_idx[k], j, scale_a * ms.a_u.vals[k].mid()));
            }
        }
        for j in 0..ms.b.ncols {
            for k in ms.b.col_ptr[j]..ms.b.col_ptr[j + 1] {
                let (r, v) = (ms.b.row_idx[k], ms.b.vals[k].mid());
                t.push((ms.n_u + r, j, v));
                t.push((j, ms.n_u + r, v));
            }
        }
        let mat = sparse::Csc::from_triplets(n, n, t);
        // coordinates for the fill-reducing order
        let mut coords = vec![[0.0f64; 3]; n];
        for c in 0..3 {
            for r in 0..ms.vel.n_reduced {
                coords[c * ms.vel.n_reduced + r] = ms.vel.dof_coords[ms.vel.reduced_to_full[r]];
            }
        }
        for p in 0..ms.n_p {
            coords[ms.n_u + p] = ms.pres.dof_coords[p];
        }
        let perm = sparse::nd_order(&mat, &coords);
        let amax = ms.a_u.vals.iter().map(|v| v.mid().abs()).fold(0.0, f64::max) * scale_a;
        let zeta = (amax.max(1.0)) * 1e-10;
        let mut reg = vec![zeta; n];
        for r in reg.iter_mut().skip(ms.n_u) {
            *r = -zeta;
        }
        let fact = sparse::ldl_factorize(&mat, &perm, Some(&reg))
            .map_err(|e| Error::Solve(format!("saddle factorization failed: {e}")))?;
        Ok(SaddleSolver { n_u: ms.n_u, n_p: ms.n_p, mat, fact })
    }

    /// Solve the symmetric saddle system with iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n_u + self.n_p;
        let mut x = rhs.to_vec();
        self.fact.solve(&mut x);
        for _ in 0..3 {
            let mut r = vec![0.0; n];
            self.mat.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = rhs[i] - r[i];
            }
            self.fact.solve(&mut r);
            for i in 0..n {
                x[i] += r[i];
            }
        }
        x
    }

    /// Velocity part of the solve with zero constraint load.
    pub fn project_velocity(&self, load_u: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n_u + self.n_p];
        rhs[..self.n_u].copy_from_slice(load_u);
        let x = self.solve(&rhs);
        x[..self.n_u].to_vec()
    }
}

/// Floating mixed Newton iteration. Returns the velocity coefficients
/// (reduced vector dofs) and the final mixed residual norm.
pub fn newton_solve(
    ms: &MixedSystem,
    f: &PolySpec,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    let n_u = ms.n_u;
    let n = n_u + ms.n_p;
    let load = assemble_load::<f64>(&ms.mesh, &ms.vel, f);
    let fnorm = load.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let stokes = SaddleSolver::new(ms, eps)?;

    // Stokes initial guess
    let mut rhs = vec![0.0; n];
    rhs[..n_u].copy_from_slice(&load);
    let mut x = stokes.solve(&rhs);

    let a_mid = ms.a_u.mid_sparse();
    let b_mid = ms.b.mid_sparse();

    let residual = |x: &[f64]| -> (Vec<f64>, f64) {
        let u = &x[..n_u];
        let p = &x[n_u..];
        let field = VectorField::<f64>::from_coeffs(&ms.vel, u);
        let trans = transport_apply(ms, &field, u);
        let mut r = vec![0.0; n];
        let mut au = vec![0.0; n_u];
        a_mid.matvec(u, &mut au);
        let mut btp = vec![0.0; n_u];
        b_mid.matvec_t(p, &mut btp);
        let mut bu = vec![0.0; ms.n_p];
        b_mid.matvec(u, &mut bu);
        for i in 0..n_u {
            r[i] = load[i] - eps * au[i] - trans[i] - btp[i];
        }
        for i in 0..ms.n_p {
            r[n_u + i] = -bu[i];
        }
        let nrm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        (r, nrm)
    };

    let (mut r, mut rnorm) = residual(&x);
    let mut best = rnorm;
    let mut iters = 0;
    for it in 0..max_iter {
        if rnorm / fnorm <= tol {
            break;
        }
        iters = it + 1;
        let u = x[..n_u].to_vec();
        let field = VectorField::<f64>::from_coeffs(&ms.vel, &u);
        let conv = spaces::to_f64_sparse(
            n_u,
            n_u,
            assemble_convection::<f64>(&ms.mesh, &ms.vel, &field),
        );
        // J = [[eps A + N', B^T], [B, 0]] applied matrix-free
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            let mut t1 = vec![0.0; n_u];
            a_mid.matvec(&v[..n_u], &mut t1);
            let mut t2 = vec![0.0; n_u];
            conv.matvec(&v[..n_u], &mut t2);
            let mut t3 = vec![0.0; n_u];
            b_mid.matvec_t(&v[n_u..], &mut t3);
            for i in 0..n_u {
                out[i] = eps * t1[i] + t2[i] + t3[i];
            }
            let mut t4 = vec![0.0; ms.n_p];
            b_mid.matvec(&v[..n_u], &mut t4);
            out[n_u..].copy_from_slice(&t4);
            out
        };
        let delta = eigen::bicgstab(n, apply, |z| stokes.solve(z), &r, 1e-10, 400)?;
        for i in 0..n {
            x[i] += delta[i];
        }
        let (rn, nn) = residual(&x);
        r = rn;
        rnorm = nn;
        if rnorm > 10.0 * best && it > 2 {
            return Err(Error::Solve(format!(
                "Newton iteration diverging: residual {rnorm:.3e} after {it} steps"
            )));
        }
        best = best.min(rnorm);
    }
    if rnorm / fnorm > tol * 100.0 {
        return Err(Error::Solve(format!(
            "Newton did not reach tolerance: relative residual {:.3e}",
            rnorm / fnorm
        )));
    }
    Ok((x[..n_u].to_vec(), x[n_u..].to_vec(), rnorm, iters))
}

/// `((u . grad) u, phi_i)` assembled directly (transport part only).
fn transport_apply(ms: &MixedSystem, field: &VectorField<f64>, u: &[f64]) -> Vec<f64> {
    let vel = &ms.vel;
    let nred = vel.n_reduced;
    let per_el: Vec<Vec<(usize, f64)>> = par::map_indexed(vel.n_elements, |t| {
        let kit = spaces::element_kit::<f64>(&ms.mesh, vel, t);
        let uf = &field.per_element[t];
        // w_a = (u . grad) u_a
        let grads: Vec<[BernsteinPoly<f64>; 3]> =
            (0..3).map(|a| poly_grad(&uf[a], &kit.geom)).collect();
        let mut out = Vec::new();
        for a in 0..3 {
            let mut w = crate::polytet::poly_mul(&uf[0], &grads[a][0]);
            w = w.add(&crate::polytet::poly_mul(&uf[1], &grads[a][1]));
            w = w.add(&crate::polytet::poly_mul(&uf[2], &grads[a][2]));
            let g = gram(&kit.basis, &[w], &kit.geom.volume_tab);
            for (i, row) in g.iter().enumerate() {
                if let Some(ri) = vel.full_to_reduced[vel.local_to_global[t][i]] {
                    out.push((a * nred + ri, row[0]));
                }
            }
        }
        out
    });
    let mut load = vec![0.0; 3 * nred];
    for chunk in per_el {
        for (i, v) in chunk {
            load[i] += v;
        }
    }
    let _ = u;
    load
}

/// The verified divergence-free correction and its certified norms.
pub struct ApproxSolution {
    /// Kernel coordinates of the enclosed corrected field.
    pub t_coords: Vec<Interval>,
    /// Velocity dof enclosure (reduced vector dofs).
    pub u_coeffs: Vec<Interval>,
    pub field: VectorField<Interval>,
    /// Floating mixed pressure from the Newton phase (reporting only).
    pub pressure: Vec<f64>,
    pub norm_l2: Interval,
    pub grad_l2: Interval,
    pub sup: f64,
    pub sup_witness: f64,
    pub grad_sup: f64,
    pub grad_sup_witness: f64,
}

/// Energy projection of a floating velocity onto the enclosed
/// divergence-free space: solves `(Z^T A Z) t = Z^T A u0` with a verified
/// enclosure, then evaluates all norms over the box.
pub fn divfree_correct(
    ms: &MixedSystem,
    kernel: &KernelBasis,
    a_v: &IvMat,
    u0: &[f64],
    pressure: Vec<f64>,
    sup_depth: usize,
) -> Result<ApproxSolution> {
    let u0_iv: Vec<Interval> = u0.iter().map(|&x| Interval::point(x)).collect();
    let au0 = ms.a_u.matvec(&u0_iv);
    let rhs = kernel.restrict(&au0);
    let t_coords = solve_enclosure(a_v, &rhs)
        .map_err(|e| Error::VerificationFailed(format!("divergence-free correction: {e}")))?;
    let u_coeffs = kernel.expand(&t_coords);
    let field = VectorField::<Interval>::from_coeffs(&ms.vel, &u_coeffs);

    let norm_l2 = field_l2_norm(&ms.mesh, &field)?;
    let grad_l2 = field_grad_l2_norm(&ms.mesh, &field)?;
    let (sup, sup_witness) = field_sup_norm(&field, sup_depth);
    let (grad_sup, grad_sup_witness) = field_grad_sup_norm(&ms.mesh, &field, sup_depth);
    Ok(ApproxSolution {
        t_coords,
        u_coeffs,
        field,
        pressure,
        norm_l2,
        grad_l2,
        sup,
        sup_witness,
        grad_sup,
        grad_sup_witness,
    })
}

/// Enclosure of the L2 norm of a vector field.
pub fn field_l2_norm(mesh: &TetMesh, field: &VectorField<Interval>) -> Result<Interval> {
    let per_el: Vec<Interval> = par::map_indexed(field.per_element.len(), |t| {
        let geom = crate::polytet::TetGeom::from_mesh(mesh, t).expect("valid mesh");
        let mut s = Interval::ZERO;
        for c in 0..3 {
            let p = &field.per_element[t][c];
            let g = gram(std::slice::from_ref(p), std::slice::from_ref(p), &geom.volume_tab);
            s += g[0][0];
        }
        s
    });
    let mut total = Interval::ZERO;
    for v in per_el {
        total += v;
    }
    // clamp the lower end: a square sum is nonnegative
    Interval::new(total.lo.max(0.0), total.hi.max(0.0)).sqrt()
}

/// Enclosure of the L2 norm of the gradient of a vector field.
pub fn field_grad_l2_norm(mesh: &TetMesh, field: &VectorField<Interval>) -> Result<Interval> {
    let per_el: Vec<Interval> = par::map_indexed(field.per_element.len(), |t| {
        let geom = crate::polytet::TetGeom::from_mesh(mesh, t).expect("valid mesh");
        let mut s = Interval::ZERO;
        for a in 0..3 {
            let g = poly_grad(&field.per_element[t][a], &geom);
            for gc in &g {
                let q = gram(std::slice::from_ref(gc), std::slice::from_ref(gc), &geom.volume_tab);
                s += q[0][0];
            }
        }
        s
    });
    let mut total = Interval::ZERO;
    for v in per_el {
        total += v;
    }
    Interval::new(total.lo.max(0.0), total.hi.max(0.0)).sqrt()
}

/// Componentwise-max sup-norm bound of a vector field over the mesh:
/// (certified upper bound, point-evaluation witness).
pub fn field_sup_norm(field: &VectorField<Interval>, depth: usize) -> (f64, f64) {
    let per_el: Vec<(f64, f64)> = par::map_indexed(field.per_element.len(), |t| {
        let mut up = 0.0f64;
        let mut wit = 0.0f64;
        for c in 0..3 {
            let b = sup_norm_bound(&field.per_element[t][c], depth);
            up = up.max(b.upper);
            wit = wit.max(b.witness);
        }
        (up, wit)
    });
    per_el
        .into_iter()
        .fold((0.0, 0.0), |(u, w), (a, b)| (u.max(a), w.max(b)))
}

/// Componentwise-max sup-norm bound of the gradient entries.
pub fn field_grad_sup_norm(
    mesh: &TetMesh,
    field: &VectorField<Interval>,
    depth: usize,
) -> (f64, f64) {
    let per_el: Vec<(f64, f64)> = par::map_indexed(field.per_element.len(), |t| {
        let geom = crate::polytet::TetGeom::from_mesh(mesh, t).expect("valid mesh");
        let mut up = 0.0f64;
        let mut wit = 0.0f64;
        for a in 0..3 {
            let g = poly_grad(&field.per_element[t][a], &geom);
            for gc in &g {
                let b = sup_norm_bound(gc, depth);
                up = up.max(b.upper);
                wit = wit.max(b.witness);
            }
        }
        (up, wit)
    });
    per_el
        .into_iter()
        .fold((0.0, 0.0), |(u, w), (a, b)| (u.max(a), w.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, zhang_refine, BlockDomain};
    use crate::rat::{rat_i64, rat_int};

    fn desk_system() -> MixedSystem {
        let d = BlockDomain::desk_domain();
        let coarse = build_cube_mesh(&d).unwrap();
        let sv = zhang_refine(&coarse);
        let topo = Topology::build(&sv);
        MixedSystem::build(sv, topo, 3, 2).unwrap()
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let ms = desk_system();
        let f = PolySpec::default();
        let (u, _p, r, iters) = newton_solve(&ms, &f, 0.25, 10, 1e-12).unwrap();
        assert!(iters <= 1);
        assert!(r < 1e-10);
        assert!(u.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn stokes_limit_recovers_linear_solution() {
        // with a polynomial load, one Newton step from the Stokes guess
        // converges fast for moderate viscosity
        let ms = desk_system();
        let mut f = PolySpec::default();
        f.comps[0].push((rat_int(1), [0, 0, 0]));
        f.comps[2].push((rat_i64(1, 2), [0, 1, 0]));
        let (u, _p, r, _) = newton_solve(&ms, &f, 1.0, 20, 1e-12).unwrap();
        assert!(r < 1e-9, "residual {r}");
        // discrete divergence of the solution is small
        let b = ms.b.mid_sparse();
        let mut bu = vec![0.0; ms.n_p];
        b.matvec(&u, &mut bu);
        let div = bu.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(div < 1e-9, "div {div}");
    }

    #[test]
    fn correction_certifies_divergence_free() {
        let ms = desk_system();
        let mut f = PolySpec::default();
        f.comps[0].push((rat_int(2), [0, 1, 0]));
        let (u, p, _, _) = newton_solve(&ms, &f, 0.5, 20, 1e-12).unwrap();
        let kernel = ms.kernel().unwrap();
        let a_v = kernel.reduce_sym(&ms.a_u);
        let sol = divfree_correct(&ms, &kernel, &a_v, &u, p, 2).unwrap();
        // certified: (div u, q) interval residual contains 0 for every row
        let bu = ms.b.matvec(&sol.u_coeffs);
        for (i, r) in bu.iter().enumerate() {
            assert!(r.contains(0.0), "divergence row {i}: {r}");
        }
        // norms behave
        assert!(sol.norm_l2.lo >= 0.0 && sol.norm_l2.hi > 0.0);
        assert!(sol.sup >= sol.sup_witness);
        assert!(sol.grad_sup >= sol.grad_sup_witness);
        assert!(sol.sup > 0.0);
        // energy orthogonality of the correction: (grad(u_hat - u0), grad Z t) ~ 0
        let u0: Vec<Interval> = u.iter().map(|&x| Interval::point(x)).collect();
        let diff: Vec<Interval> = sol
            .u_coeffs
            .iter()
            .zip(&u0)
            .map(|(a, b)| *a - *b)
            .collect();
        let adiff = ms.a_u.matvec(&diff);
        let proj = kernel.restrict(&adiff);
        for (j, v) in proj.iter().enumerate() {
            assert!(v.contains(0.0), "orthogonality defect in coord {j}: {v}");
        }
        // idempotence up to enclosure width: correcting the midpoint moves
        // the coefficients by less than the enclosure widths
        let mid: Vec<f64> = sol.u_coeffs.iter().map(|v| v.mid()).collect();
        let sol2 = divfree_correct(&ms, &kernel, &a_v, &mid, vec![], 0).unwrap();
        for (a, b) in sol.u_coeffs.iter().zip(&sol2.u_coeffs) {
            let gap = (a.mid() - b.mid()).abs();
            assert!(gap <= 1e-7 + 10.0 * (a.width() + b.width()), "gap {gap}");
        }
    }
}

//! Interval (and floating) assembly of the system matrices: gradient and
//! mass Grams, divergence constraints, convection linearizations, loads,
//! and the exact representation matrices used by the hypercircle stage.
//!
//! Every integral goes through the exact Bernstein product tables, so the
//! interval entries enclose the true integrals; the f64 instantiation of
//! the same code serves the approximation phase.

use super::{ScalarSpace, RtSpace};
use crate::interval::{Interval, IvSparse};
use crate::mesh::TetMesh;
use crate::par;
use crate::polytet::{
    lattice, poly_deriv, poly_grad, poly_mul, BernsteinPoly, Coeff, TabFactor, TetGeom,
};
use crate::rat::{rat_int, rsolve, Rat};
use num_traits::Zero;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Unit-volume product-integral tables `T[a][b] = \int B^da_a B^db_b / |K|`.
static GRAM_TABLES: OnceLock<Mutex<HashMap<(u8, u8), Arc<Vec<Vec<TabFactor>>>>>> = OnceLock::new();

fn gram_table(da: u8, db: u8) -> Arc<Vec<Vec<TabFactor>>> {
    let map = GRAM_TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    guard
        .entry((da, db))
        .or_insert_with(|| {
            let la = lattice(da);
            let lb = lattice(db);
            let n = (da + db) as i64;
            let unit = Rat::new(6.into(), ((n + 1) * (n + 2) * (n + 3)).into());
            let t = la
                .indices
                .iter()
                .map(|a| {
                    lb.indices
                        .iter()
                        .map(|b| {
                            let f = Rat::new(
                                (crate::polytet::multinomial(a) * crate::polytet::multinomial(b))
                                    .into(),
                                crate::polytet::multinomial(&[
                                    a[0] + b[0],
                                    a[1] + b[1],
                                    a[2] + b[2],
                                    a[3] + b[3],
                                ])
                                .into(),
                            ) * &unit;
                            TabFactor::new(f)
                        })
                        .collect()
                })
                .collect();
            Arc::new(t)
        })
        .clone()
}

/// Gram matrix `G[i][j] = \int p_i q_j dK` over an element of volume
/// `vol`, factored through the unit product table.
pub fn gram<C: Coeff>(
    ps: &[BernsteinPoly<C>],
    qs: &[BernsteinPoly<C>],
    vol: &TabFactor,
) -> Vec<Vec<C>> {
    if ps.is_empty() || qs.is_empty() {
        return vec![vec![]; ps.len()];
    }
    let da = ps[0].degree;
    let db = qs[0].degree;
    let tab = gram_table(da, db);
    let la = tab.len();
    // M[a][j] = sum_b T[a][b] q_j[b]
    let mut m = vec![vec![C::c_zero(); qs.len()]; la];
    for (a, row) in tab.iter().enumerate() {
        for (j, q) in qs.iter().enumerate() {
            let mut acc = C::c_zero();
            for (b, f) in row.iter().enumerate() {
                if !q.coeffs[b].c_is_zero() {
                    let t = q.coeffs[b].mul_tab(f);
                    acc.c_add(&t);
                }
            }
            m[a][j] = acc;
        }
    }
    // G[i][j] = vol * sum_a p_i[a] M[a][j]
    ps.iter()
        .map(|p| {
            (0..qs.len())
                .map(|j| {
                    let mut acc = C::c_zero();
                    for (a, c) in p.coeffs.iter().enumerate() {
                        if !c.c_is_zero() {
                            let t = c.c_mul(&m[a][j]);
                            acc.c_add(&t);
                        }
                    }
                    acc.mul_tab(vol)
                })
                .collect()
        })
        .collect()
}

/// A polynomial vector field defined globally in cartesian monomials; each
/// term is `coeff * x^p0 y^p1 z^p2`.
#[derive(Debug, Clone, Default)]
pub struct PolySpec {
    pub comps: [Vec<(Rat, [u8; 3])>; 3],
}

impl PolySpec {
    pub fn degree(&self) -> u8 {
        self.comps
            .iter()
            .flatten()
            .map(|(_, p)| p[0] + p[1] + p[2])
            .max()
            .unwrap_or(0)
    }

    /// Exact Bernstein form of component `c` on element `t`.
    pub fn on_element<C: Coeff>(&self, mesh: &TetMesh, t: usize, c: usize, degree: u8) -> BernsteinPoly<C> {
        let lat1 = lattice(1);
        let verts = mesh.tets[t];
        let coord = |d: usize| -> BernsteinPoly<Rat> {
            let mut p = BernsteinPoly::zero(1);
            for (pos, a) in lat1.indices.iter().enumerate() {
                let m = (0..4).find(|&mm| a[mm] == 1).unwrap();
                p.coeffs[pos] = mesh.vertices[verts[m]][d].clone();
            }
            p
        };
        let xyz = [coord(0), coord(1), coord(2)];
        let mut out = BernsteinPoly::<Rat>::zero(degree);
        for (coef, pows) in &self.comps[c] {
            let mut term = BernsteinPoly::<Rat>::constant(0, coef.clone());
            for (d, reps) in pows.iter().enumerate() {
                for _ in 0..*reps {
                    term = poly_mul(&term, &xyz[d]);
                }
            }
            out = out.add(&term.raise_to(degree));
        }
        BernsteinPoly { degree, coeffs: out.coeffs.iter().map(C::from_rat).collect() }
    }
}

/// A per-element vector field with coefficients in C (degree fixed).
#[derive(Clone)]
pub struct VectorField<C: Coeff> {
    pub degree: u8,
    pub per_element: Vec<[BernsteinPoly<C>; 3]>,
}

impl<C: Coeff> VectorField<C> {
    pub fn zero(degree: u8, n_elements: usize) -> Self {
        VectorField {
            degree,
            per_element: (0..n_elements)
                .map(|_| std::array::from_fn(|_| BernsteinPoly::zero(degree)))
                .collect(),
        }
    }

    /// Reconstruct from reduced vector-dof coefficients over a scalar space
    /// (component-major numbering).
    pub fn from_coeffs(space: &ScalarSpace, coeffs: &[C]) -> Self {
        assert_eq!(coeffs.len(), 3 * space.n_reduced);
        let degree = space.local_basis[0].degree;
        let per_element = par::map_indexed(space.n_elements, |t| {
            let mut f: [BernsteinPoly<C>; 3] = std::array::from_fn(|_| BernsteinPoly::zero(degree));
            for (j, &g) in space.local_to_global[t].iter().enumerate() {
                if let Some(r) = space.full_to_reduced[g] {
                    for (comp, fc) in f.iter_mut().enumerate() {
                        let c = &coeffs[comp * space.n_reduced + r];
                        if !c.c_is_zero() {
                            let bj = &space.local_basis[j];
                            for (pos, b) in bj.coeffs.iter().enumerate() {
                                if !b.c_is_zero() {
                                    let t = C::from_rat(&rat_like::<C>(b)).c_mul(c);
                                    fc.coeffs[pos].c_add(&t);
                                }
                            }
                        }
                    }
                }
            }
            f
        });
        VectorField { degree, per_element }
    }
}

// helper: the scalar space basis is stored in Rat; this converts one coeff
fn rat_like<C: Coeff>(r: &Rat) -> Rat {
    let _ = std::marker::PhantomData::<C>;
    r.clone()
}

/// Interval-valued local basis and gradients for one element.
pub struct ElementKit<C: Coeff> {
    pub geom: TetGeom,
    pub basis: Vec<BernsteinPoly<C>>,
    pub grads: Vec<[BernsteinPoly<C>; 3]>,
}

pub fn element_kit<C: Coeff>(mesh: &TetMesh, space: &ScalarSpace, t: usize) -> ElementKit<C> {
    let geom = TetGeom::from_mesh(mesh, t).expect("mesh validated");
    let basis: Vec<BernsteinPoly<C>> = space
        .local_basis
        .iter()
        .map(|p| BernsteinPoly { degree: p.degree, coeffs: p.coeffs.iter().map(C::from_rat).collect() })
        .collect();
    let grads = basis.iter().map(|b| poly_grad(b, &geom)).collect();
    ElementKit { geom, basis, grads }
}

/// Scalar stiffness `(grad phi_i, grad phi_j)` on reduced dofs.
pub fn assemble_scalar_stiffness<C: Coeff>(mesh: &TetMesh, space: &ScalarSpace) -> Vec<(usize, usize, C)> {
    let per_el = par::map_indexed(space.n_elements, |t| {
        let kit = element_kit::<C>(mesh, space, t);
        let n = kit.basis.len();
        let mut local = vec![vec![C::c_zero(); n]; n];
        for c in 0..3 {
            let dc: Vec<BernsteinPoly<C>> = kit.grads.iter().map(|g| g[c].clone()).collect();
            let g = gram(&dc, &dc, &kit.geom.volume_tab);
            for i in 0..n {
                for j in 0..n {
                    local[i][j].c_add(&g[i][j]);
                }
            }
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            let Some(ri) = space.full_to_reduced[space.local_to_global[t][i]] else { continue };
            for j in 0..n {
                let Some(rj) = space.full_to_reduced[space.local_to_global[t][j]] else { continue };
                triplets.push((ri, rj, local[i][j].clone()));
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Scalar mass `(phi_i, phi_j)` on reduced dofs.
pub fn assemble_scalar_mass<C: Coeff>(mesh: &TetMesh, space: &ScalarSpace) -> Vec<(usize, usize, C)> {
    let per_el = par::map_indexed(space.n_elements, |t| {
        let kit = element_kit::<C>(mesh, space, t);
        let n = kit.basis.len();
        let g = gram(&kit.basis, &kit.basis, &kit.geom.volume_tab);
        let mut triplets = Vec::new();
        for i in 0..n {
            let Some(ri) = space.full_to_reduced[space.local_to_global[t][i]] else { continue };
            for j in 0..n {
                let Some(rj) = space.full_to_reduced[space.local_to_global[t][j]] else { continue };
                triplets.push((ri, rj, g[i][j].clone()));
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Divergence coupling `(d phi_j / d x_a, q_i)`: rows are full pressure
/// dofs, columns are reduced vector velocity dofs (component-major).
pub fn assemble_divergence<C: Coeff>(
    mesh: &TetMesh,
    vel: &ScalarSpace,
    pres: &ScalarSpace,
) -> Vec<(usize, usize, C)> {
    let nvr = vel.n_reduced;
    let per_el = par::map_indexed(vel.n_elements, |t| {
        let kit = element_kit::<C>(mesh, vel, t);
        let pres_kit = element_kit::<C>(mesh, pres, t);
        let mut triplets = Vec::new();
        for a in 0..3 {
            let da: Vec<BernsteinPoly<C>> = kit.grads.iter().map(|g| g[a].clone()).collect();
            let g = gram(&pres_kit.basis, &da, &pres_kit.geom.volume_tab);
            for (qi, qrow) in g.iter().enumerate() {
                let rq = pres.local_to_global[t][qi];
                for (j, val) in qrow.iter().enumerate() {
                    if let Some(rj) = vel.full_to_reduced[vel.local_to_global[t][j]] {
                        triplets.push((rq, a * nvr + rj, val.clone()));
                    }
                }
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Convection linearization at a velocity field `u`:
/// `((u . grad) phi_j e_b, phi_i e_a) + ((phi_j e_b . grad) u, phi_i e_a)`
/// over reduced vector dofs. Row index = test (a, i), column = trial (b, j).
pub fn assemble_convection<C: Coeff>(
    mesh: &TetMesh,
    vel: &ScalarSpace,
    u: &VectorField<C>,
) -> Vec<(usize, usize, C)> {
    let nvr = vel.n_reduced;
    let per_el = par::map_indexed(vel.n_elements, |t| {
        let kit = element_kit::<C>(mesh, vel, t);
        let n = kit.basis.len();
        let uf = &u.per_element[t];
        // w_j = (u . grad) phi_j, degree deg(u) + deg(phi) - 1
        let w: Vec<BernsteinPoly<C>> = (0..n)
            .map(|j| {
                let mut acc = poly_mul(&uf[0], &kit.grads[j][0]);
                acc = acc.add(&poly_mul(&uf[1], &kit.grads[j][1]));
                acc.add(&poly_mul(&uf[2], &kit.grads[j][2]))
            })
            .collect();
        let c1 = gram(&kit.basis, &w, &kit.geom.volume_tab);
        // du[a][b] = d u_a / d x_b
        let du: Vec<[BernsteinPoly<C>; 3]> = (0..3).map(|a| poly_grad(&uf[a], &kit.geom)).collect();
        let mut triplets = Vec::new();
        // diagonal blocks: (a == b) from the transport term
        for (i, row) in c1.iter().enumerate() {
            let Some(ri) = vel.full_to_reduced[vel.local_to_global[t][i]] else { continue };
            for (j, v) in row.iter().enumerate() {
                let Some(rj) = vel.full_to_reduced[vel.local_to_global[t][j]] else { continue };
                for a in 0..3 {
                    triplets.push((a * nvr + ri, a * nvr + rj, v.clone()));
                }
            }
        }
        // full blocks: (phi_j e_b . grad u)_a = phi_j du[a][b]
        for a in 0..3 {
            for b in 0..3 {
                let sphi: Vec<BernsteinPoly<C>> =
                    (0..n).map(|j| poly_mul(&kit.basis[j], &du[a][b])).collect();
                let g = gram(&kit.basis, &sphi, &kit.geom.volume_tab);
                for (i, row) in g.iter().enumerate() {
                    let Some(ri) = vel.full_to_reduced[vel.local_to_global[t][i]] else { continue };
                    for (j, v) in row.iter().enumerate() {
                        let Some(rj) = vel.full_to_reduced[vel.local_to_global[t][j]] else {
                            continue;
                        };
                        triplets.push((a * nvr + ri, b * nvr + rj, v.clone()));
                    }
                }
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Load vector `(f_a, phi_i e_a)` over reduced vector dofs.
pub fn assemble_load<C: Coeff>(mesh: &TetMesh, vel: &ScalarSpace, f: &PolySpec) -> Vec<C> {
    let nvr = vel.n_reduced;
    let deg = f.degree();
    let per_el: Vec<Vec<(usize, C)>> = par::map_indexed(vel.n_elements, |t| {
        let kit = element_kit::<C>(mesh, vel, t);
        let mut out = Vec::new();
        for a in 0..3 {
            let fa: BernsteinPoly<C> = f.on_element(mesh, t, a, deg);
            if fa.is_zero() {
                continue;
            }
            let g = gram(&kit.basis, &[fa], &kit.geom.volume_tab);
            for (i, row) in g.iter().enumerate() {
                if let Some(ri) = vel.full_to_reduced[vel.local_to_global[t][i]] {
                    out.push((a * nvr + ri, row[0].clone()));
                }
            }
        }
        out
    });
    let mut load = vec![C::c_zero(); 3 * nvr];
    for chunk in per_el {
        for (i, v) in chunk {
            load[i].c_add(&v);
        }
    }
    load
}

/// L2 Gram of one Raviart-Thomas copy: `(P_I, P_J)` vector-valued fields.
pub fn assemble_rt_mass<C: Coeff>(mesh: &TetMesh, rt: &RtSpace) -> Vec<(usize, usize, C)> {
    let per_el = par::map_indexed(rt.n_elements, |t| {
        let geom = TetGeom::from_mesh(mesh, t).expect("mesh validated");
        let fields: Vec<[BernsteinPoly<C>; 3]> = rt.local_basis[t]
            .iter()
            .map(|f| {
                std::array::from_fn(|c| BernsteinPoly {
                    degree: f[c].degree,
                    coeffs: f[c].coeffs.iter().map(C::from_rat).collect(),
                })
            })
            .collect();
        let n = fields.len();
        let mut local = vec![vec![C::c_zero(); n]; n];
        for c in 0..3 {
            let fc: Vec<BernsteinPoly<C>> = fields.iter().map(|f| f[c].clone()).collect();
            let g = gram(&fc, &fc, &geom.volume_tab);
            for i in 0..n {
                for j in 0..n {
                    local[i][j].c_add(&g[i][j]);
                }
            }
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((
                    rt.local_to_global[t][i],
                    rt.local_to_global[t][j],
                    local[i][j].clone(),
                ));
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Exact barycentric coordinates of `point` with respect to tet `t`.
pub fn parent_bary(mesh: &TetMesh, t: usize, point: &crate::rat::RPoint) -> [Rat; 4] {
    let verts = mesh.tets[t];
    let a: Vec<Vec<Rat>> = (0..4)
        .map(|r| {
            (0..4)
                .map(|c| {
                    if r == 0 {
                        rat_int(1)
                    } else {
                        mesh.vertices[verts[c]][r - 1].clone()
                    }
                })
                .collect()
        })
        .collect();
    let b: Vec<Vec<Rat>> = (0..4)
        .map(|r| vec![if r == 0 { rat_int(1) } else { point[r - 1].clone() }])
        .collect();
    let x = rsolve(a, b).expect("nondegenerate parent");
    [x[0][0].clone(), x[1][0].clone(), x[2][0].clone(), x[3][0].clone()]
}

/// Cross Gram between one RT copy on the coarse mesh and gradients of a
/// scalar space on its Zhang refinement: `X[I][j] = (P_I, grad phi_j)`.
/// Children of coarse element `t` are `4t .. 4t+3` in the refined mesh.
pub fn assemble_rt_cross_grad<C: Coeff>(
    coarse: &TetMesh,
    rt: &RtSpace,
    fine: &TetMesh,
    space: &ScalarSpace,
) -> Vec<(usize, usize, C)> {
    assert_eq!(fine.tets.len(), 4 * coarse.tets.len());
    let per_el = par::map_indexed(coarse.tets.len(), |t| {
        let mut triplets = Vec::new();
        for child_k in 0..4 {
            let child = 4 * t + child_k;
            let kit = element_kit::<C>(fine, space, child);
            // child vertex rows in parent barycentric
            let rows_rat: [[Rat; 4]; 4] = std::array::from_fn(|i| {
                parent_bary(coarse, t, &fine.vertices[fine.tets[child][i]])
            });
            let rows: [[C; 4]; 4] =
                std::array::from_fn(|i| std::array::from_fn(|j| C::from_rat(&rows_rat[i][j])));
            let restricted: Vec<[BernsteinPoly<C>; 3]> = rt.local_basis[t]
                .iter()
                .map(|f| {
                    std::array::from_fn(|c| {
                        let fc = BernsteinPoly::<C> {
                            degree: f[c].degree,
                            coeffs: f[c].coeffs.iter().map(C::from_rat).collect(),
                        };
                        fc.subdivide(&rows)
                    })
                })
                .collect();
            let n = restricted.len();
            let m = kit.basis.len();
            let mut local = vec![vec![C::c_zero(); m]; n];
            for c in 0..3 {
                let pc: Vec<BernsteinPoly<C>> = restricted.iter().map(|f| f[c].clone()).collect();
                let gc: Vec<BernsteinPoly<C>> = kit.grads.iter().map(|g| g[c].clone()).collect();
                let g = gram(&pc, &gc, &kit.geom.volume_tab);
                for i in 0..n {
                    for j in 0..m {
                        local[i][j].c_add(&g[i][j]);
                    }
                }
            }
            for i in 0..n {
                for j in 0..m {
                    if let Some(rj) = space.full_to_reduced[space.local_to_global[child][j]] {
                        triplets.push((rt.local_to_global[t][i], rj, local[i][j].clone()));
                    }
                }
            }
        }
        triplets
    });
    per_el.into_iter().flatten().collect()
}

/// Exact representation of `div P_I` in the degree-d elementwise Bernstein
/// basis of the coarse mesh (rows: element * L + lattice position).
pub fn divergence_rep_rt(mesh: &TetMesh, rt: &RtSpace, d: u8) -> Vec<(usize, usize, Rat)> {
    let per_el_len = crate::polytet::lattice_size(d);
    let mut triplets = Vec::new();
    for t in 0..rt.n_elements {
        let geom = TetGeom::from_mesh(mesh, t).expect("mesh validated");
        for (j, field) in rt.local_basis[t].iter().enumerate() {
            let f: [BernsteinPoly<Rat>; 3] =
                std::array::from_fn(|c| field[c].clone());
            let div = crate::polytet::poly_div(&f, &geom).raise_to(d);
            for (pos, c) in div.coeffs.iter().enumerate() {
                if !c.is_zero() {
                    triplets.push((t * per_el_len + pos, rt.local_to_global[t][j], c.clone()));
                }
            }
        }
    }
    triplets
}

/// Exact representation of `(grad phi_j)_c` in the degree-d elementwise
/// Bernstein basis: rows are (component, element, position) with
/// row = c * n_el * L + element * L + position.
pub fn gradient_rep_scalar(
    mesh: &TetMesh,
    space: &ScalarSpace,
    d: u8,
) -> Vec<(usize, usize, Rat)> {
    let per_el_len = crate::polytet::lattice_size(d);
    let n_el = space.n_elements;
    let mut triplets = Vec::new();
    for t in 0..n_el {
        let geom = TetGeom::from_mesh(mesh, t).expect("mesh validated");
        for (j, b) in space.local_basis.iter().enumerate() {
            let g = space.local_to_global[t][j];
            for c in 0..3 {
                let dc = poly_deriv(b, &geom, c).raise_to(d);
                for (pos, v) in dc.coeffs.iter().enumerate() {
                    if !v.is_zero() {
                        triplets.push((c * n_el * per_el_len + t * per_el_len + pos, g, v.clone()));
                    }
                }
            }
        }
    }
    triplets
}

/// Collect triplets into an interval sparse matrix.
pub fn to_iv_sparse(nrows: usize, ncols: usize, t: Vec<(usize, usize, Interval)>) -> IvSparse {
    IvSparse::from_triplets(nrows, ncols, t)
}

pub fn to_f64_sparse(
    nrows: usize,
    ncols: usize,
    t: Vec<(usize, usize, f64)>,
) -> crate::linalg::sparse::Csc<f64> {
    crate::linalg::sparse::Csc::from_triplets(nrows, ncols, t)
}

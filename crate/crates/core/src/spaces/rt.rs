//! Raviart-Thomas H(div) elements of index m (local fields
//! `(a, b, c) + d (x - x0)` with a, b, c of degree m and d homogeneous of
//! degree m). Facet degrees of freedom are the degree-m triangle Bernstein
//! coefficients of the normal trace, parametrized by the facet's sorted
//! global vertex triple against the fixed global facet normal; adjacent
//! elements therefore see identical functionals and sharing coefficients is
//! exactly H(div) continuity. Interior degrees of freedom are moments
//! against vector polynomials of degree m-1.
//!
//! All local constructions (traces, moments, the dual-basis inversion) are
//! exact rational computations.

use super::SpaceDescriptor;
use crate::error::{Error, Result};
use crate::mesh::{TetMesh, Topology};
use crate::polytet::{lattice, lattice_size, BernsteinPoly, TetGeom};
use crate::rat::{rat_int, rcross, rpoint_sub, rsolve, Rat};
use num_traits::Zero;

/// 2D (triangle) lattice of multi-indices summing to n.
fn tri_lattice(n: u8) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    for i in (0..=n).rev() {
        for j in (0..=n - i).rev() {
            out.push([i, j, n - i - j]);
        }
    }
    out
}

fn tri_lattice_size(n: u8) -> usize {
    ((n as usize + 1) * (n as usize + 2)) / 2
}

fn tri_index(lat: &[[u8; 3]], a: &[u8; 3]) -> usize {
    lat.iter().position(|x| x == a).expect("triangle index")
}

/// Exact degree reduction on a triangle: given the Bernstein coefficients
/// (degree n+1) of a polynomial known to be of degree <= n, return its
/// degree-n coefficients. Solved through the normal equations of the
/// degree-raise map; the consistency of the input is asserted.
fn tri_degree_reduce(coeffs: &[Rat], n1: u8) -> Result<Vec<Rat>> {
    assert!(n1 >= 1);
    let n = n1 - 1;
    let hi = tri_lattice(n1);
    let lo = tri_lattice(n);
    // raise matrix R: c_hi[g] = sum_m c_lo[g - e_m] * g_m / n1
    let mut r = vec![vec![Rat::zero(); lo.len()]; hi.len()];
    let denom = rat_int(n1 as i64);
    for (gi, g) in hi.iter().enumerate() {
        for m in 0..3 {
            if g[m] == 0 {
                continue;
            }
            let mut down = *g;
            down[m] -= 1;
            let li = tri_index(&lo, &down);
            r[gi][li] += rat_int(g[m] as i64) / &denom;
        }
    }
    // normal equations
    let mut rtr = vec![vec![Rat::zero(); lo.len()]; lo.len()];
    let mut rtc = vec![vec![Rat::zero()]; lo.len()];
    for gi in 0..hi.len() {
        for a in 0..lo.len() {
            if r[gi][a].is_zero() {
                continue;
            }
            for b in 0..lo.len() {
                if !r[gi][b].is_zero() {
                    let t = &r[gi][a] * &r[gi][b];
                    rtr[a][b] += t;
                }
            }
            let t = &r[gi][a] * &coeffs[gi];
            rtc[a][0] += t;
        }
    }
    let c = rsolve(rtr, rtc).ok_or_else(|| Error::Space("degree reduction failed".into()))?;
    let c: Vec<Rat> = c.into_iter().map(|row| row.into_iter().next().unwrap()).collect();
    // consistency: raising back must reproduce the input exactly
    for (gi, g) in hi.iter().enumerate() {
        let mut s = Rat::zero();
        for m in 0..3 {
            if g[m] == 0 {
                continue;
            }
            let mut down = *g;
            down[m] -= 1;
            s += &c[tri_index(&lo, &down)] * rat_int(g[m] as i64) / &denom;
        }
        if s != coeffs[gi] {
            return Err(Error::Space(
                "normal trace has unexpected degree (facet dof extraction)".into(),
            ));
        }
    }
    Ok(c)
}

/// Realized Raviart-Thomas space (one H(div) copy; `components = 3` in the
/// descriptor scales the reported dimension for the tensor version).
pub struct RtSpace {
    pub desc: SpaceDescriptor,
    pub n_elements: usize,
    /// Scalar-copy dof count.
    pub n_scalar: usize,
    pub per_facet: usize,
    pub n_interior_per_el: usize,
    /// Per element: local basis fields (3 Bernstein components, degree m+1).
    pub local_basis: Vec<Vec<[BernsteinPoly<Rat>; 3]>>,
    /// Per element: global scalar dof per local basis field.
    pub local_to_global: Vec<Vec<usize>>,
    pub dof_coords: Vec<[f64; 3]>,
}

impl RtSpace {
    pub fn dof_count(&self) -> usize {
        self.n_scalar * self.desc.components as usize
    }
}

pub fn build_rt(mesh: &TetMesh, topo: &Topology, desc: &SpaceDescriptor) -> Result<RtSpace> {
    let m = desc.degree;
    if m > 2 {
        return Err(Error::Config(format!("unsupported Raviart-Thomas index {m} (supported: 0..=2)")));
    }
    let deg = m + 1; // local polynomial degree of the components
    let per_facet = tri_lattice_size(m);
    let n_interior = if m == 0 { 0 } else { 3 * lattice_size(m - 1) };
    let local_dim = 3 * lattice_size(m) + tri_lattice_size(m);
    assert_eq!(local_dim, 4 * per_facet + n_interior);
    let n_scalar = topo.facets.len() * per_facet + mesh.tets.len() * n_interior;

    let latm = lattice(m);
    let lat1 = lattice(1);
    let lat_deg = lattice(deg);
    let tri_hi = tri_lattice(deg);
    let interior_deg = if m == 0 { 0 } else { m - 1 };
    let lat_int = lattice(interior_deg);

    let mut local_basis = Vec::with_capacity(mesh.tets.len());
    let mut local_to_global = Vec::with_capacity(mesh.tets.len());

    for (ti, t) in mesh.tets.iter().enumerate() {
        let geom = TetGeom::from_mesh(mesh, ti)?;
        let verts: [&crate::rat::RPoint; 4] = [
            &mesh.vertices[t[0]],
            &mesh.vertices[t[1]],
            &mesh.vertices[t[2]],
            &mesh.vertices[t[3]],
        ];
        // coordinate polynomials relative to the local origin v0
        let coord = |c: usize| -> BernsteinPoly<Rat> {
            let mut p = BernsteinPoly::zero(1);
            for (pos, a) in lat1.indices.iter().enumerate() {
                let mth = (0..4).find(|&mm| a[mm] == 1).unwrap();
                p.coeffs[pos] = &verts[mth][c] - &verts[0][c];
            }
            p
        };
        let xyz = [coord(0), coord(1), coord(2)];

        // spanning fields: (P_m)^3 then the homogeneous radial part
        let mut span: Vec<[BernsteinPoly<Rat>; 3]> = Vec::with_capacity(local_dim);
        for comp in 0..3 {
            for p in 0..latm.len() {
                let mut b = BernsteinPoly::<Rat>::zero(m);
                b.coeffs[p] = rat_int(1);
                let b = b.raise_to(deg);
                let zero = BernsteinPoly::<Rat>::zero(deg);
                let mut field = [zero.clone(), zero.clone(), zero];
                field[comp] = b;
                span.push(field);
            }
        }
        // monomials (x-x0)^a (y-y0)^b (z-z0)^c of total degree exactly m
        for tri in tri_lattice(m) {
            let mut q = BernsteinPoly::<Rat>::constant(0, rat_int(1));
            for (c, reps) in tri.iter().enumerate() {
                for _ in 0..*reps {
                    q = crate::polytet::poly_mul(&q, &xyz[c]);
                }
            }
            // q has degree m; field q * (x - x0, y - y0, z - z0), degree m+1
            let field = std::array::from_fn(|c| crate::polytet::poly_mul(&q, &xyz[c]));
            span.push(field);
        }
        debug_assert_eq!(span.len(), local_dim);

        // dof functionals
        let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(local_dim);
        let mut gids: Vec<usize> = Vec::with_capacity(local_dim);
        // facet dofs: local facet opposite vertex mo
        for mo in 0..4 {
            let fid = topo.tet_facets[ti][mo];
            let locals: Vec<usize> = (0..4).filter(|&mm| mm != mo).collect();
            let gverts = [t[locals[0]], t[locals[1]], t[locals[2]]];
            let mut sorted = gverts;
            sorted.sort_unstable();
            // permutation: sorted position -> local-axis position
            let perm: [usize; 3] =
                std::array::from_fn(|j| gverts.iter().position(|&g| g == sorted[j]).unwrap());
            let p0 = &mesh.vertices[sorted[0]];
            let p1 = &mesh.vertices[sorted[1]];
            let p2 = &mesh.vertices[sorted[2]];
            let normal = rcross(&rpoint_sub(p1, p0), &rpoint_sub(p2, p0));
            // rows for the per-facet trace coefficients of each span field
            let mut facet_rows: Vec<Vec<Rat>> = vec![Vec::with_capacity(local_dim); per_facet];
            for field in &span {
                // s = p . normal, degree m+1
                let mut s = BernsteinPoly::<Rat>::zero(deg);
                for c in 0..3 {
                    let scaled = field[c].scale_rat(&normal[c]);
                    s = s.add(&scaled);
                }
                // restrict to the facet lambda_mo = 0, local-axis order
                let trace: Vec<Rat> = lat_deg
                    .indices
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a[mo as usize] == 0)
                    .map(|(p, _)| s.coeffs[p].clone())
                    .collect();
                // reorder the three barycentric axes into sorted-global order
                let mut reordered = vec![Rat::zero(); trace.len()];
                for (pos, a) in tri_hi.iter().enumerate() {
                    // a indexes local-axis lattice; find its sorted-order image
                    let img = [a[perm[0]], a[perm[1]], a[perm[2]]];
                    reordered[tri_index(&tri_hi, &img)] = trace[pos].clone();
                }
                let reduced = tri_degree_reduce(&reordered, deg)?;
                for (r, v) in reduced.into_iter().enumerate() {
                    facet_rows[r].push(v);
                }
            }
            for (r, row) in facet_rows.into_iter().enumerate() {
                rows.push(row);
                gids.push(fid * per_facet + r);
            }
        }
        // interior moments against (P_{m-1})^3
        if n_interior > 0 {
            for comp in 0..3 {
                for p in 0..lat_int.len() {
                    let mut q = BernsteinPoly::<Rat>::zero(interior_deg);
                    q.coeffs[p] = rat_int(1);
                    let row: Vec<Rat> = span
                        .iter()
                        .map(|field| {
                            crate::polytet::poly_product_integral(
                                &field[comp],
                                &q,
                                &geom.volume_tab,
                            )
                        })
                        .collect();
                    rows.push(row);
                    gids.push(
                        topo.facets.len() * per_facet
                            + ti * n_interior
                            + comp * lat_int.len()
                            + p,
                    );
                }
            }
        }

        // invert the dof matrix: basis_j = sum_i inv[i][j] span_i
        let idmat: Vec<Vec<Rat>> = (0..local_dim)
            .map(|r| {
                (0..local_dim)
                    .map(|c| if r == c { rat_int(1) } else { Rat::zero() })
                    .collect()
            })
            .collect();
        let inv = rsolve(rows, idmat).ok_or_else(|| {
            Error::Space(format!("element {ti}: Raviart-Thomas dof matrix singular"))
        })?;
        let mut basis: Vec<[BernsteinPoly<Rat>; 3]> = Vec::with_capacity(local_dim);
        for j in 0..local_dim {
            let mut field: [BernsteinPoly<Rat>; 3] = std::array::from_fn(|_| BernsteinPoly::zero(deg));
            for (i, sf) in span.iter().enumerate() {
                if inv[i][j].is_zero() {
                    continue;
                }
                for c in 0..3 {
                    let scaled = sf[c].scale_rat(&inv[i][j]);
                    field[c] = field[c].add(&scaled);
                }
            }
            basis.push(field);
        }
        local_basis.push(basis);
        local_to_global.push(gids);
    }

    let mut dof_coords = vec![[0.0; 3]; n_scalar];
    for (f, tri) in topo.facets.iter().enumerate() {
        let mut c = [0.0; 3];
        for &v in tri {
            let p = mesh.vertex_f64(v);
            for d in 0..3 {
                c[d] += p[d] / 3.0;
            }
        }
        for r in 0..per_facet {
            dof_coords[f * per_facet + r] = c;
        }
    }
    for t in 0..mesh.tets.len() {
        let c = mesh.centroid_f64(t);
        for r in 0..n_interior {
            dof_coords[topo.facets.len() * per_facet + t * n_interior + r] = c;
        }
    }

    Ok(RtSpace {
        desc: *desc,
        n_elements: mesh.tets.len(),
        n_scalar,
        per_facet,
        n_interior_per_el: n_interior,
        local_basis,
        local_to_global,
        dof_coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, BlockDomain};
    use crate::rat::rat_i64;
    use crate::spaces::{build_space, Space};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn paper_dimension() {
        let d = BlockDomain::paper_domain();
        let m = build_cube_mesh(&d).unwrap();
        let t = Topology::build(&m);
        let s = build_space(&m, &t, &SpaceDescriptor::raviart_thomas(2, 3)).unwrap();
        assert_eq!(s.dof_count(), 12060);
        let Space::Rt(rt) = s else { panic!() };
        assert_eq!(rt.n_scalar, 4020);
    }

    #[test]
    fn normal_trace_continuity() {
        // random global dof vector: traces from both sides of an interior
        // facet must agree exactly
        let d = BlockDomain::full(2, 1, 1, rat_i64(1, 2));
        let mesh = build_cube_mesh(&d).unwrap();
        let topo = Topology::build(&mesh);
        let desc = SpaceDescriptor::raviart_thomas(2, 1);
        let rt = build_rt(&mesh, &topo, &desc).unwrap();
        let mut rng = StdRng::seed_from_u64(77);
        let dofs: Vec<Rat> = (0..rt.n_scalar).map(|_| rat_i64(rng.gen_range(-5..5), 3)).collect();
        // reconstruct per element and compare facet traces
        for (fi, pair) in topo.facet_tets.iter().enumerate() {
            let (Some(t1), Some(t2)) = (pair[0], pair[1]) else { continue };
            let trace = |ti: usize| -> Vec<Rat> {
                let t = &mesh.tets[ti];
                let mo = (0..4).find(|&m| topo.tet_facets[ti][m] == fi).unwrap();
                // assemble p on element ti
                let deg = 3u8;
                let latd = lattice(deg);
                let mut p: [BernsteinPoly<Rat>; 3] = std::array::from_fn(|_| BernsteinPoly::zero(deg));
                for (j, &g) in rt.local_to_global[ti].iter().enumerate() {
                    for c in 0..3 {
                        let scaled = rt.local_basis[ti][j][c].scale_rat(&dofs[g]);
                        p[c] = p[c].add(&scaled);
                    }
                }
                // normal trace in sorted-global facet axes
                let locals: Vec<usize> = (0..4).filter(|&mm| mm != mo).collect();
                let gverts = [t[locals[0]], t[locals[1]], t[locals[2]]];
                let mut sorted = gverts;
                sorted.sort_unstable();
                let perm: [usize; 3] =
                    std::array::from_fn(|j| gverts.iter().position(|&g| g == sorted[j]).unwrap());
                let p0 = &mesh.vertices[sorted[0]];
                let p1 = &mesh.vertices[sorted[1]];
                let p2 = &mesh.vertices[sorted[2]];
                let normal = rcross(&rpoint_sub(p1, p0), &rpoint_sub(p2, p0));
                let mut s = BernsteinPoly::<Rat>::zero(deg);
                for c in 0..3 {
                    s = s.add(&p[c].scale_rat(&normal[c]));
                }
                let tri_hi = tri_lattice(deg);
                let trace: Vec<Rat> = latd
                    .indices
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a[mo] == 0)
                    .map(|(p, _)| s.coeffs[p].clone())
                    .collect();
                let mut reordered = vec![Rat::zero(); trace.len()];
                for (pos, a) in tri_hi.iter().enumerate() {
                    let img = [a[perm[0]], a[perm[1]], a[perm[2]]];
                    reordered[tri_index(&tri_hi, &img)] = trace[pos].clone();
                }
                reordered
            };
            assert_eq!(trace(t1), trace(t2), "normal trace mismatch on facet {fi}");
        }
    }

    #[test]
    fn dual_basis_property() {
        // dof_i(basis_j) = delta_ij on one element (spot check via traces)
        let d = BlockDomain::full(1, 1, 1, rat_i64(1, 1));
        let mesh = build_cube_mesh(&d).unwrap();
        let topo = Topology::build(&mesh);
        let rt = build_rt(&mesh, &topo, &SpaceDescriptor::raviart_thomas(1, 1)).unwrap();
        // interior moment of basis fields tied to facets must vanish
        let ti = 0usize;
        let geom = TetGeom::from_mesh(&mesh, ti).unwrap();
        let lat0 = lattice(0);
        for (j, &g) in rt.local_to_global[ti].iter().enumerate() {
            let is_facet_dof = g < topo.facets.len() * rt.per_facet;
            for comp in 0..3 {
                let mut q = BernsteinPoly::<Rat>::zero(0);
                q.coeffs[0] = rat_int(1);
                let mom = crate::polytet::poly_product_integral(
                    &rt.local_basis[ti][j][comp],
                    &q,
                    &geom.volume_tab,
                );
                if is_facet_dof {
                    // nothing to assert in general
                    let _ = mom;
                } else {
                    // interior dofs are moment-dual: exactly one component hits 1
                    let expected_g = topo.facets.len() * rt.per_facet
                        + ti * rt.n_interior_per_el
                        + comp * lat0.len();
                    if g == expected_g {
                        assert_eq!(mom, rat_int(1));
                    } else {
                        assert_eq!(mom, Rat::zero());
                    }
                }
            }
        }
    }
}

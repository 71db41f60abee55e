//! Finite element spaces over tetrahedral meshes and their interval
//! assembly: conforming Lagrange (degree <= 3), elementwise-discontinuous
//! polynomials, the Raviart-Thomas H(div) family and the Crouzeix-Raviart
//! nonconforming space.
//!
//! Degrees of freedom are enumerated entity-by-entity (vertices, then
//! edges, then facets, then cells, each in the lexicographic entity order
//! of [`crate::mesh::Topology`]), vector components outermost. The
//! enumeration is pure bookkeeping over exact data, so dimension counts
//! and certificates are reproducible run to run.

mod assemble;
mod rt;

pub use assemble::*;
pub use rt::RtSpace;

use crate::error::{Error, Result};
use crate::mesh::{TetMesh, Topology};
use crate::polytet::{lattice, lattice_size, multinomial, BernsteinPoly, MultiIndex};
use crate::rat::{rat_int, rsolve, Rat};
use num_traits::Zero;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Lagrange,
    Discontinuous,
    RaviartThomas,
    CrouzeixRaviart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bc {
    None,
    HomogeneousDirichlet,
    ZeroMean,
    /// Zero integral on every boundary facet (Crouzeix-Raviart Dirichlet).
    ZeroFacetIntegral,
}

/// Requested space: family, polynomial degree and boundary condition.
/// `components` is 1 for scalar spaces and 3 for vector versions; for
/// Raviart-Thomas, 3 means the tensor of three H(div) copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    pub family: Family,
    pub degree: u8,
    pub bc: Bc,
    pub components: u8,
}

impl SpaceDescriptor {
    pub fn lagrange(degree: u8, bc: Bc, components: u8) -> Self {
        SpaceDescriptor { family: Family::Lagrange, degree, bc, components }
    }
    pub fn discontinuous(degree: u8, bc: Bc, components: u8) -> Self {
        SpaceDescriptor { family: Family::Discontinuous, degree, bc, components }
    }
    pub fn raviart_thomas(index: u8, components: u8) -> Self {
        SpaceDescriptor { family: Family::RaviartThomas, degree: index, bc: Bc::None, components }
    }
    pub fn crouzeix_raviart(bc: Bc, components: u8) -> Self {
        SpaceDescriptor { family: Family::CrouzeixRaviart, degree: 1, bc, components }
    }
}

/// A realized scalar-basis space (Lagrange / discontinuous / CR).
/// Vector versions reuse the scalar tables with component-major numbering:
/// global vector dof = comp * n_scalar + scalar dof.
#[derive(Clone)]
pub struct ScalarSpace {
    pub desc: SpaceDescriptor,
    pub n_elements: usize,
    /// Scalar dofs before boundary elimination.
    pub n_full: usize,
    /// Scalar dofs after Dirichlet elimination (== n_full without one).
    pub n_reduced: usize,
    pub full_to_reduced: Vec<Option<usize>>,
    pub reduced_to_full: Vec<usize>,
    /// Per element: global full scalar dof per local basis function.
    pub local_to_global: Vec<Vec<usize>>,
    /// Local basis polynomials in exact Bernstein form, shared per element
    /// pattern (same for all elements for these families).
    pub local_basis: Arc<Vec<BernsteinPoly<Rat>>>,
    /// Barycenter-ish coordinate per full scalar dof (orderings, reporting).
    pub dof_coords: Vec<[f64; 3]>,
}

impl ScalarSpace {
    /// Reported dimension: components times reduced scalar count, minus the
    /// zero-mean constraint when requested.
    pub fn dof_count(&self) -> usize {
        let base = self.n_reduced * self.desc.components as usize;
        if self.desc.bc == Bc::ZeroMean {
            base - 1
        } else {
            base
        }
    }

    pub fn n_vector(&self) -> usize {
        self.n_reduced * self.desc.components as usize
    }
}

/// A realized space of any family.
pub enum Space {
    Scalar(ScalarSpace),
    Rt(RtSpace),
}

impl Space {
    pub fn dof_count(&self) -> usize {
        match self {
            Space::Scalar(s) => s.dof_count(),
            Space::Rt(r) => r.dof_count(),
        }
    }
}

/// Build the realized space for a descriptor over a mesh.
pub fn build_space(mesh: &TetMesh, topo: &Topology, desc: &SpaceDescriptor) -> Result<Space> {
    match desc.family {
        Family::Lagrange => Ok(Space::Scalar(build_lagrange(mesh, topo, desc)?)),
        Family::Discontinuous => Ok(Space::Scalar(build_discontinuous(mesh, topo, desc)?)),
        Family::CrouzeixRaviart => Ok(Space::Scalar(build_cr(mesh, topo, desc)?)),
        Family::RaviartThomas => Ok(Space::Rt(rt::build_rt(mesh, topo, desc)?)),
    }
}

/// Nodal Lagrange basis of a given degree in exact Bernstein form,
/// cached (geometry-free: barycentric coordinates only).
pub fn lagrange_local_basis(degree: u8) -> Arc<Vec<BernsteinPoly<Rat>>> {
    static CACHE: OnceLock<Mutex<HashMap<u8, Arc<Vec<BernsteinPoly<Rat>>>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    guard
        .entry(degree)
        .or_insert_with(|| {
            let lat = lattice(degree);
            let n = lat.len();
            let k = rat_int(degree as i64);
            // E[point][basis] = B_alpha(x_beta), x_beta = beta / k
            let e: Vec<Vec<Rat>> = lat
                .indices
                .iter()
                .map(|beta| {
                    lat.indices
                        .iter()
                        .map(|alpha| {
                            let mut v = rat_int(multinomial(alpha) as i64);
                            for m in 0..4 {
                                for _ in 0..alpha[m] {
                                    v *= rat_int(beta[m] as i64) / &k;
                                }
                            }
                            v
                        })
                        .collect()
                })
                .collect();
            let id: Vec<Vec<Rat>> = (0..n)
                .map(|r| (0..n).map(|c| if r == c { rat_int(1) } else { Rat::zero() }).collect())
                .collect();
            let inv = rsolve(e, id).expect("Bernstein evaluation matrix is invertible");
            let basis = (0..n)
                .map(|b| BernsteinPoly {
                    degree,
                    coeffs: (0..n).map(|a| inv[a][b].clone()).collect(),
                })
                .collect();
            Arc::new(basis)
        })
        .clone()
}

/// Classify a degree-k lattice index: which entity carries its node.
enum NodeEntity {
    Vertex(usize),          // local vertex
    Edge(usize, u8),        // local edge id in TET_EDGES order, coefficient of second()
    Face(usize),            // local face (opposite vertex)
}

fn classify_node(alpha: &MultiIndex, degree: u8) -> Result<NodeEntity> {
    let nz: Vec<usize> = (0..4).filter(|&m| alpha[m] > 0).collect();
    match nz.len() {
        1 => Ok(NodeEntity::Vertex(nz[0])),
        2 => {
            let local_edges: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
            let e = local_edges
                .iter()
                .position(|e| e[0] == nz[0] && e[1] == nz[1])
                .expect("edge classification");
            Ok(NodeEntity::Edge(e, alpha[nz[1]]))
        }
        3 => {
            if degree > 3 {
                return Err(Error::Config(format!(
                    "Lagrange degree {degree} not supported (multiple facet nodes need facet orientation data)"
                )));
            }
            let m = (0..4).find(|&m| alpha[m] == 0).unwrap();
            Ok(NodeEntity::Face(m))
        }
        _ => Err(Error::Config(format!(
            "Lagrange degree {degree} not supported (interior nodes unhandled)"
        ))),
    }
}

fn build_lagrange(mesh: &TetMesh, topo: &Topology, desc: &SpaceDescriptor) -> Result<ScalarSpace> {
    if desc.degree < 1 || desc.degree > 3 {
        return Err(Error::Config(format!(
            "unsupported Lagrange degree {} (supported: 1..=3)",
            desc.degree
        )));
    }
    if desc.bc == Bc::ZeroFacetIntegral {
        return Err(Error::Config("zero-facet-integral only applies to Crouzeix-Raviart".into()));
    }
    let k = desc.degree;
    let per_edge = (k - 1) as usize;
    let nv = mesh.vertices.len();
    let ne = topo.edges.len();
    let nf = topo.facets.len();
    let face_nodes = if k == 3 { 1 } else { 0 };
    let n_full = nv + ne * per_edge + nf * face_nodes;

    let lat = lattice(k);
    let local_edges: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
    let mut local_to_global = Vec::with_capacity(mesh.tets.len());
    for (ti, t) in mesh.tets.iter().enumerate() {
        let mut l2g = Vec::with_capacity(lat.len());
        for alpha in &lat.indices {
            let g = match classify_node(alpha, k)? {
                NodeEntity::Vertex(m) => t[m],
                NodeEntity::Edge(le, coeff_second) => {
                    let (a, b) = (t[local_edges[le][0]], t[local_edges[le][1]]);
                    let eid = topo.tet_edges[ti][le];
                    // orient along the global edge (min -> max vertex id)
                    let coeff_of_max = if b > a { coeff_second } else { k - coeff_second };
                    nv + eid * per_edge + (coeff_of_max as usize) - 1
                }
                NodeEntity::Face(m) => {
                    let fid = topo.tet_facets[ti][m];
                    nv + ne * per_edge + fid
                }
            };
            l2g.push(g);
        }
        local_to_global.push(l2g);
    }

    // boundary classification per full dof
    let mut on_boundary = vec![false; n_full];
    for v in 0..nv {
        on_boundary[v] = topo.boundary_vertex[v];
    }
    for e in 0..ne {
        if topo.boundary_edge[e] {
            for p in 0..per_edge {
                on_boundary[nv + e * per_edge + p] = true;
            }
        }
    }
    if face_nodes == 1 {
        for f in 0..nf {
            if topo.boundary_facet[f] {
                on_boundary[nv + ne * per_edge + f] = true;
            }
        }
    }

    let dirichlet = desc.bc == Bc::HomogeneousDirichlet;
    let mut full_to_reduced = vec![None; n_full];
    let mut reduced_to_full = Vec::new();
    for i in 0..n_full {
        if !(dirichlet && on_boundary[i]) {
            full_to_reduced[i] = Some(reduced_to_full.len());
            reduced_to_full.push(i);
        }
    }

    let mut dof_coords = vec![[0.0; 3]; n_full];
    for v in 0..nv {
        dof_coords[v] = mesh.vertex_f64(v);
    }
    for (e, pair) in topo.edges.iter().enumerate() {
        let a = mesh.vertex_f64(pair[0]);
        let b = mesh.vertex_f64(pair[1]);
        for p in 0..per_edge {
            let t = (p + 1) as f64 / k as f64;
            dof_coords[nv + e * per_edge + p] =
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
        }
    }
    if face_nodes == 1 {
        for (f, tri) in topo.facets.iter().enumerate() {
            let mut c = [0.0; 3];
            for &v in tri {
                let p = mesh.vertex_f64(v);
                for d in 0..3 {
                    c[d] += p[d] / 3.0;
                }
            }
            dof_coords[nv + ne * per_edge + f] = c;
        }
    }

    Ok(ScalarSpace {
        desc: *desc,
        n_elements: mesh.tets.len(),
        n_full,
        n_reduced: reduced_to_full.len(),
        full_to_reduced,
        reduced_to_full,
        local_to_global,
        local_basis: lagrange_local_basis(k),
        dof_coords,
    })
}

fn build_discontinuous(
    mesh: &TetMesh,
    _topo: &Topology,
    desc: &SpaceDescriptor,
) -> Result<ScalarSpace> {
    if desc.bc == Bc::HomogeneousDirichlet || desc.bc == Bc::ZeroFacetIntegral {
        return Err(Error::Config("discontinuous spaces take no boundary condition".into()));
    }
    let d = desc.degree;
    let per_el = lattice_size(d);
    let n_full = mesh.tets.len() * per_el;
    let local_to_global = (0..mesh.tets.len())
        .map(|t| (0..per_el).map(|p| t * per_el + p).collect())
        .collect();
    // basis = raw Bernstein basis functions
    let lat = lattice(d);
    let basis: Vec<BernsteinPoly<Rat>> = (0..lat.len())
        .map(|p| {
            let mut b = BernsteinPoly::zero(d);
            b.coeffs[p] = rat_int(1);
            b
        })
        .collect();
    let mut dof_coords = vec![[0.0; 3]; n_full];
    for t in 0..mesh.tets.len() {
        let c = mesh.centroid_f64(t);
        for p in 0..per_el {
            dof_coords[t * per_el + p] = c;
        }
    }
    Ok(ScalarSpace {
        desc: *desc,
        n_elements: mesh.tets.len(),
        n_full,
        n_reduced: n_full,
        full_to_reduced: (0..n_full).map(Some).collect(),
        reduced_to_full: (0..n_full).collect(),
        local_to_global,
        local_basis: Arc::new(basis),
        dof_coords,
    })
}

fn build_cr(mesh: &TetMesh, topo: &Topology, desc: &SpaceDescriptor) -> Result<ScalarSpace> {
    if desc.degree != 1 {
        return Err(Error::Config("Crouzeix-Raviart supported at degree 1 only".into()));
    }
    let nf = topo.facets.len();
    let n_full = nf;
    // local basis: phi_opposite(m) = 1 - 3 lambda_m, tied to facet opposite m
    let lat1 = lattice(1);
    let basis: Vec<BernsteinPoly<Rat>> = (0..4)
        .map(|m| {
            let mut b = BernsteinPoly::zero(1);
            for (p, a) in lat1.indices.iter().enumerate() {
                b.coeffs[p] = if a[m] == 1 { rat_int(-2) } else { rat_int(1) };
            }
            b
        })
        .collect();
    let local_to_global: Vec<Vec<usize>> = (0..mesh.tets.len())
        .map(|t| (0..4).map(|m| topo.tet_facets[t][m]).collect())
        .collect();
    let drop_boundary = desc.bc == Bc::ZeroFacetIntegral || desc.bc == Bc::HomogeneousDirichlet;
    let mut full_to_reduced = vec![None; n_full];
    let mut reduced_to_full = Vec::new();
    for f in 0..nf {
        if !(drop_boundary && topo.boundary_facet[f]) {
            full_to_reduced[f] = Some(reduced_to_full.len());
            reduced_to_full.push(f);
        }
    }
    let mut dof_coords = vec![[0.0; 3]; n_full];
    for (f, tri) in topo.facets.iter().enumerate() {
        let mut c = [0.0; 3];
        for &v in tri {
            let p = mesh.vertex_f64(v);
            for d in 0..3 {
                c[d] += p[d] / 3.0;
            }
        }
        dof_coords[f] = c;
    }
    Ok(ScalarSpace {
        desc: *desc,
        n_elements: mesh.tets.len(),
        n_full,
        n_reduced: reduced_to_full.len(),
        full_to_reduced,
        reduced_to_full,
        local_to_global,
        local_basis: Arc::new(basis),
        dof_coords,
    })
}

/// Dimension of the divergence-free subspace as the dof-count difference,
/// optionally cross-checked against the floating rank of the divergence
/// matrix on small problems.
pub fn sv_divfree_dim(
    velocity: &ScalarSpace,
    pressure: &ScalarSpace,
    div_matrix: Option<&crate::interval::IvSparse>,
) -> Result<usize> {
    let nu = velocity.dof_count();
    let np = pressure.dof_count();
    if np == 0 {
        return Ok(nu);
    }
    if np >= nu {
        return Err(Error::Space(format!(
            "pressure space ({np}) at least as large as velocity space ({nu})"
        )));
    }
    let dim = nu - np;
    if let Some(b) = div_matrix {
        // floating rank cross-check (small problems)
        let dense = b.to_dense().mid();
        let svd = dense.svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > smax * 1e-9)
            .count();
        let kernel = b.ncols - rank;
        if kernel != dim {
            return Err(Error::Space(format!(
                "divergence-free dimension mismatch: dof difference {dim}, rank-based kernel {kernel} (mesh is not of Scott-Vogelius type?)"
            )));
        }
    }
    Ok(dim)
}

/// Barycentric coordinates of the degree-k lattice node `alpha / k`.
pub fn lattice_point_bary(alpha: &MultiIndex, degree: u8) -> [Rat; 4] {
    let k = rat_int(degree as i64);
    std::array::from_fn(|m| rat_int(alpha[m] as i64) / &k)
}

/// Exact volume-weighted mean functional of a discontinuous space:
/// coefficients c with c^T dofs = integral of the represented function.
pub fn disc_mean_functional(mesh: &TetMesh, space: &ScalarSpace) -> Vec<Rat> {
    assert_eq!(space.desc.family, Family::Discontinuous);
    let d = space.desc.degree;
    let per_el = lattice_size(d);
    let n = d as i64;
    let unit = Rat::new(6.into(), ((n + 1) * (n + 2) * (n + 3)).into());
    let mut out = vec![Rat::zero(); space.n_full];
    for t in 0..mesh.tets.len() {
        let w = mesh.tet_volume(t) * &unit;
        for p in 0..per_el {
            out[t * per_el + p] = w.clone();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, zhang_refine, BlockDomain};
    use crate::rat::rat_i64;

    fn paper_meshes() -> (TetMesh, Topology, TetMesh, Topology) {
        let d = BlockDomain::paper_domain();
        let coarse = build_cube_mesh(&d).unwrap();
        let sv = zhang_refine(&coarse);
        let tc = Topology::build(&coarse);
        let ts = Topology::build(&sv);
        (coarse, tc, sv, ts)
    }

    #[test]
    fn table_dimensions_on_paper_meshes() {
        let (coarse, tc, sv, ts) = paper_meshes();

        // velocity space U_h0: vector Lagrange degree 3, Dirichlet, SV mesh
        let u_h0 = build_space(&sv, &ts, &SpaceDescriptor::lagrange(3, Bc::HomogeneousDirichlet, 3)).unwrap();
        assert_eq!(u_h0.dof_count(), 7965);

        // pressure space X_h0: scalar discontinuous degree 2, zero mean, SV mesh
        let x_h0 = build_space(&sv, &ts, &SpaceDescriptor::discontinuous(2, Bc::ZeroMean, 1)).unwrap();
        assert_eq!(x_h0.dof_count(), 5999);

        // vector discontinuous degree 2 on the coarse mesh
        let x_h = build_space(&coarse, &tc, &SpaceDescriptor::discontinuous(2, Bc::None, 3)).unwrap();
        assert_eq!(x_h.dof_count(), 4500);

        // scalar conforming degree 3 on the coarse mesh: the entity census
        // gives V + 2E + F = 75 + 2*295 + 370 = 1035
        let u_h = build_space(&coarse, &tc, &SpaceDescriptor::lagrange(3, Bc::None, 1)).unwrap();
        assert_eq!(tc.edges.len(), 295);
        assert_eq!(tc.facets.len(), 370);
        assert_eq!(coarse.vertices.len(), 75);
        assert_eq!(u_h.dof_count(), 1035);

        // divergence-free dimension by difference
        let (Space::Scalar(u), Space::Scalar(x)) = (&u_h0, &x_h0) else { panic!() };
        assert_eq!(sv_divfree_dim(u, x, None).unwrap(), 1966);
    }

    #[test]
    fn lagrange_basis_is_nodal() {
        for k in 1..=3u8 {
            let basis = lagrange_local_basis(k);
            let lat = lattice(k);
            for (p, alpha) in lat.indices.iter().enumerate() {
                let x = lattice_point_bary(alpha, k);
                for (q, b) in basis.iter().enumerate() {
                    let v = b.eval(&x);
                    assert_eq!(v, if p == q { rat_int(1) } else { Rat::zero() });
                }
            }
        }
    }

    #[test]
    fn dirichlet_strips_boundary() {
        let d = BlockDomain::full(1, 1, 1, rat_i64(1, 1));
        let m = build_cube_mesh(&d).unwrap();
        let t = Topology::build(&m);
        // every vertex of a single cube is on the boundary; P1 Dirichlet is empty
        let s = build_space(&m, &t, &SpaceDescriptor::lagrange(1, Bc::HomogeneousDirichlet, 1)).unwrap();
        assert_eq!(s.dof_count(), 0);
        let sv = zhang_refine(&m);
        let tsv = Topology::build(&sv);
        let s = build_space(&sv, &tsv, &SpaceDescriptor::lagrange(3, Bc::HomogeneousDirichlet, 3)).unwrap();
        assert_eq!(s.dof_count(), 237); // 79 interior scalar nodes, 3 components
    }

    #[test]
    fn cr_counts_facets() {
        let d = BlockDomain::full(2, 1, 1, rat_i64(1, 2));
        let m = build_cube_mesh(&d).unwrap();
        let t = Topology::build(&m);
        let s = build_space(&m, &t, &SpaceDescriptor::crouzeix_raviart(Bc::ZeroFacetIntegral, 3)).unwrap();
        let interior = t.facet_tets.iter().filter(|p| p[1].is_some()).count();
        assert_eq!(s.dof_count(), 3 * interior);
    }

    #[test]
    fn zero_mean_counts() {
        let d = BlockDomain::desk_domain();
        let m = build_cube_mesh(&d).unwrap();
        let t = Topology::build(&m);
        let s = build_space(&m, &t, &SpaceDescriptor::discontinuous(2, Bc::ZeroMean, 1)).unwrap();
        assert_eq!(s.dof_count(), m.tets.len() * 10 - 1);
        // empty pressure space: dim V_h equals dim of velocity
        let u = build_space(&m, &t, &SpaceDescriptor::lagrange(2, Bc::HomogeneousDirichlet, 3)).unwrap();
        let Space::Scalar(u) = u else { panic!() };
        let empty = ScalarSpace {
            desc: SpaceDescriptor::discontinuous(0, Bc::None, 1),
            n_elements: 0,
            n_full: 0,
            n_reduced: 0,
            full_to_reduced: vec![],
            reduced_to_full: vec![],
            local_to_global: vec![],
            local_basis: Arc::new(vec![]),
            dof_coords: vec![],
        };
        assert_eq!(sv_divfree_dim(&u, &empty, None).unwrap(), u.dof_count());
    }
}

//! Certified eigenvalue bounds for the Stokes operator and the constants
//! derived from its first eigenvalue.
//!
//! Lower bounds come from the nonconforming route: the Crouzeix-Raviart
//! discretization with elementwise divergence-free constraint gives a
//! discrete eigenvalue whose certified lower bound is pushed through the
//! projection-error formula `lambda >= lambda_h / (1 + (0.3804 h)^2 lambda_h)`
//! with h the largest element diameter. Upper bounds come from the
//! conforming side: a certified Rayleigh quotient at an enclosed
//! divergence-free Scott-Vogelius field.

use crate::divfree::KernelBasis;
use crate::error::{Error, Result};
use crate::interval::{Interval, IvSparse};
use crate::linalg::{eigen, sparse, verified};
use crate::mesh::{build_cube_mesh, BlockDomain, TetMesh, Topology};
use crate::polytet::TetGeom;
use crate::rat::{rat_abs, rat_to_interval, Rat};
use crate::spaces::{self, Bc, ScalarSpace, SpaceDescriptor};
use num_traits::Zero;

/// Everything the certificate records about the eigenvalue stage.
#[derive(Debug, Clone)]
pub struct StokesEigReport {
    /// Certified lower bound for the first Stokes eigenvalue.
    pub lambda1_lower: f64,
    /// Certified lower bound for the discrete nonconforming eigenvalue.
    pub lambda_h1_lower: f64,
    /// Floating approximation of the discrete eigenvalue (diagnostics).
    pub lambda_h1_approx: f64,
    /// Certified upper bound (conforming Rayleigh quotient), when computed.
    pub lambda1_upper: Option<f64>,
    /// Upper bound for the Poincare constant 1/sqrt(lambda1).
    pub c_p: f64,
    /// Upper bound for the L4 embedding constant.
    pub c_4p: f64,
    /// Upper bound for the continuity constant G.
    pub g: f64,
    /// Largest tet diameter of the eigenvalue mesh.
    pub h_used: f64,
    /// Refinement levels applied to the base domain.
    pub levels: usize,
    /// Reduced (divergence-free) nonconforming dimension.
    pub cr_dim: usize,
}

/// Exact sparse kernel basis of the per-element divergence constraints of
/// the vector Crouzeix-Raviart space. Columns: free dofs; each column has
/// corrections along the spanning-tree slave chain.
pub struct CrKernel {
    pub n_dofs: usize,
    pub dim: usize,
    pub z: IvSparse,
    pub free_dofs: Vec<usize>,
    /// Coordinates for ordering heuristics, one per kernel column.
    pub coords: Vec<[f64; 3]>,
}

/// Build the constraint rows: one per element, entries over reduced vector
/// CR dofs (component-major), with exact rational values.
fn cr_constraints(
    mesh: &TetMesh,
    topo: &Topology,
    space: &ScalarSpace,
) -> Result<Vec<Vec<(usize, Rat)>>> {
    let nred = space.n_reduced;
    let mut rows = Vec::with_capacity(mesh.tets.len());
    for t in 0..mesh.tets.len() {
        let geom = TetGeom::from_mesh(mesh, t)?;
        let mut row = Vec::new();
        for m in 0..4 {
            let f = topo.tet_facets[t][m];
            let Some(fr) = space.full_to_reduced[f] else { continue };
            for c in 0..3 {
                // d/dx_c of (1 - 3 lambda_m) = -3 g_m[c]; scale rows by -1/3
                let v = geom.grads[m][c].clone();
                if !v.is_zero() {
                    row.push((c * nred + fr, v));
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Spanning tree of the dual graph (elements joined by interior facets),
/// rooted at element 0; returns parent element and connecting facet.
fn dual_spanning_tree(mesh: &TetMesh, topo: &Topology) -> Result<Vec<Option<(usize, usize)>>> {
    let n = mesh.tets.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0usize);
    let mut count = 1;
    while let Some(t) = queue.pop_front() {
        for m in 0..4 {
            let f = topo.tet_facets[t][m];
            let pair = topo.facet_tets[f];
            let other = match pair {
                [Some(a), Some(b)] => {
                    if a == t {
                        b
                    } else {
                        a
                    }
                }
                _ => continue,
            };
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((t, f));
                queue.push_back(other);
                count += 1;
            }
        }
    }
    if count != n {
        return Err(Error::Mesh("dual graph disconnected".into()));
    }
    Ok(parent)
}

/// Exact kernel basis of the elementwise divergence constraints on the
/// Dirichlet vector CR space. One constraint (the root element's) is
/// dependent: the volume-weighted sum of all elementwise divergences is the
/// boundary flux, which vanishes on the constrained space.
pub fn cr_divfree_kernel(
    mesh: &TetMesh,
    topo: &Topology,
    space: &ScalarSpace,
) -> Result<CrKernel> {
    let nred = space.n_reduced;
    let n_dofs = 3 * nred;
    let rows = cr_constraints(mesh, topo, space)?;
    let parent = dual_spanning_tree(mesh, topo)?;

    // order elements leaves-to-root by depth, skipping the root (dropped row)
    let n_el = mesh.tets.len();
    let mut depth = vec![0usize; n_el];
    for t in 0..n_el {
        let mut d = 0;
        let mut cur = t;
        while let Some((p, _)) = parent[cur] {
            d += 1;
            cur = p;
        }
        depth[t] = d;
    }
    let mut order: Vec<usize> = (1..n_el).collect();
    order.sort_by_key(|&t| std::cmp::Reverse(depth[t]));

    // slave dof per kept element: the component with the largest coefficient
    // on the tree facet toward the parent
    let mut slave_of = vec![usize::MAX; n_el];
    let mut is_slave = vec![false; n_dofs];
    for &t in &order {
        let (_, f) = parent[t].expect("non-root");
        let fr = space.full_to_reduced[f]
            .ok_or_else(|| Error::Mesh("tree facet unexpectedly on boundary".into()))?;
        // pick the largest |coefficient| among the three components
        let mut best: Option<(usize, Rat)> = None;
        for (dof, v) in &rows[t] {
            if *dof % nred == fr {
                let a = rat_abs(v);
                if best.as_ref().map_or(true, |(_, b)| a > *b) {
                    best = Some((*dof, a));
                }
            }
        }
        let (dof, _) = best.ok_or_else(|| Error::Mesh("empty tree-facet constraint".into()))?;
        slave_of[t] = dof;
        is_slave[dof] = true;
    }

    // forward substitution, leaves first: for each free dof j, the column
    // z_j = e_j + corrections on slaves; constraint t (in order) gives the
    // slave coefficient from already-known entries.
    let free_dofs: Vec<usize> = (0..n_dofs).filter(|&d| !is_slave[d]).collect();
    let dim = free_dofs.len();
    // constraint membership per dof
    let mut dof_rows: Vec<Vec<usize>> = vec![Vec::new(); n_dofs];
    for (t, row) in rows.iter().enumerate() {
        for (dof, _) in row {
            dof_rows[*dof].push(t);
        }
    }
    let mut triplets: Vec<(usize, usize, Interval)> = Vec::new();
    let mut coords = Vec::with_capacity(dim);
    for (j, &fd) in free_dofs.iter().enumerate() {
        // sparse exact column as a map dof -> value
        let mut col: std::collections::BTreeMap<usize, Rat> = std::collections::BTreeMap::new();
        col.insert(fd, crate::rat::rat_int(1));
        for &t in &order {
            // does constraint t see any current support?
            let mut s = Rat::zero();
            let mut slave_coef = Rat::zero();
            let mut active = false;
            for (dof, v) in &rows[t] {
                if *dof == slave_of[t] {
                    slave_coef = v.clone();
                    continue;
                }
                if let Some(x) = col.get(dof) {
                    s += v * x;
                    active = true;
                }
            }
            if active && !s.is_zero() {
                let corr = -s / &slave_coef;
                col.insert(slave_of[t], corr);
            }
        }
        for (dof, v) in &col {
            triplets.push((*dof, j, rat_to_interval(v)));
        }
        let fr = fd % nred;
        coords.push(space.dof_coords[space.reduced_to_full[fr]]);
    }
    let z = IvSparse::from_triplets(n_dofs, dim, triplets);
    Ok(CrKernel { n_dofs, dim, z, free_dofs, coords })
}

/// The projection-error lower-bound formula with the nonconforming
/// interpolation constant `0.3804 h` (h: largest element diameter),
/// evaluated in interval arithmetic.
pub fn liu_lower_bound(lambda_h1_lower: f64, h: Interval) -> Result<f64> {
    if lambda_h1_lower <= 0.0 {
        return Err(Error::Domain("nonpositive discrete eigenvalue bound".into()));
    }
    let c = Interval::from_decimal("0.3804")? * h;
    let lam = Interval::point(lambda_h1_lower);
    let denom = Interval::ONE + c.square() * lam;
    Ok((lam.div_checked(&denom)?).lo)
}

/// Assembled reduced CR pencil plus metadata.
pub struct CrPencil {
    pub a_z: IvSparse,
    pub m_z: IvSparse,
    pub kernel: CrKernel,
    pub h: Interval,
}

pub fn cr_stokes_pencil(domain: &BlockDomain, levels: usize) -> Result<CrPencil> {
    let refined = domain.refined(levels);
    let mesh = build_cube_mesh(&refined)?;
    let topo = Topology::build(&mesh);
    let desc = SpaceDescriptor::crouzeix_raviart(Bc::ZeroFacetIntegral, 3);
    let spaces::Space::Scalar(space) = spaces::build_space(&mesh, &topo, &desc)? else {
        unreachable!()
    };
    let kernel = cr_divfree_kernel(&mesh, &topo, &space)?;
    let nred = space.n_reduced;

    // broken stiffness and mass on the scalar space, replicated per component
    let stiff = spaces::assemble_scalar_stiffness::<Interval>(&mesh, &space);
    let mass = spaces::assemble_scalar_mass::<Interval>(&mesh, &space);
    let expand = |t: Vec<(usize, usize, Interval)>| -> IvSparse {
        let mut out = Vec::with_capacity(3 * t.len());
        for (i, j, v) in t {
            for c in 0..3 {
                out.push((c * nred + i, c * nred + j, v));
            }
        }
        IvSparse::from_triplets(3 * nred, 3 * nred, out)
    };
    let a = expand(stiff);
    let m = expand(mass);
    let az = kernel.z.transpose().mul_sparse(&a.mul_sparse(&kernel.z));
    let mz = kernel.z.transpose().mul_sparse(&m.mul_sparse(&kernel.z));
    let h = mesh.mesh_size().diameter();
    Ok(CrPencil { a_z: az, m_z: mz, kernel, h })
}

/// Certified lower bound for the first Stokes eigenvalue on the domain,
/// using the nonconforming discretization of the `levels`-times refined
/// mesh. Returns the report fields (without the upper bound).
pub fn stokes_lambda1_lower(domain: &BlockDomain, levels: usize) -> Result<StokesEigReport> {
    let pencil = cr_stokes_pencil(domain, levels)?;
    let n = pencil.a_z.nrows;

    // floating approximation of the smallest discrete eigenvalue
    let a_mid = pencil.a_z.mid_sparse();
    let m_mid = pencil.m_z.mid_sparse();
    let perm = sparse::nd_order(&a_mid, &pencil.kernel.coords);
    let fact = sparse::ldl_factorize(&a_mid, &perm, None)
        .map_err(|e| Error::Solve(format!("CR stiffness factorization failed: {e}")))?;
    let lanczos = eigen::lanczos_sym(
        n,
        60.min(n),
        2024,
        |x| {
            let mut mx = vec![0.0; n];
            m_mid.matvec(x, &mut mx);
            fact.solve(&mut mx);
            mx
        },
        |x, y| {
            let mut my = vec![0.0; n];
            m_mid.matvec(y, &mut my);
            x.iter().zip(&my).map(|(a, b)| a * b).sum()
        },
    )?;
    let theta = *lanczos
        .values
        .last()
        .ok_or_else(|| Error::Solve("empty Lanczos spectrum".into()))?;
    if theta <= 0.0 {
        return Err(Error::Solve("nonpositive Ritz value for CR pencil".into()));
    }
    let lambda_h1 = 1.0 / theta;

    // certify: A - l M positive definite on the reduced space
    let shift_test = |ell: f64| -> bool {
        let shifted = shift_pencil(&pencil.a_z, &pencil.m_z, ell);
        sparse::ldl_factorize(&shifted, &perm, None).is_ok()
    };
    let lам = verified::max_certified_lower(lambda_h1, shift_test).ok_or_else(|| {
        Error::VerificationFailed(format!(
            "could not certify a lower bound near the CR eigenvalue {lambda_h1:.6}"
        ))
    })?;

    let lambda1_lower = liu_lower_bound(lам, pencil.h)?;
    let (c_p, c_4p, g) = derived_constants(lambda1_lower)?;
    Ok(StokesEigReport {
        lambda1_lower,
        lambda_h1_lower: lам,
        lambda_h1_approx: lambda_h1,
        lambda1_upper: None,
        c_p,
        c_4p,
        g,
        h_used: pencil.h.hi,
        levels,
        cr_dim: n,
    })
}

/// Interval matrix `A - ell * M` over the merged pattern.
pub fn shift_pencil(a: &IvSparse, m: &IvSparse, ell: f64) -> sparse::Csc<Interval> {
    let mut t: Vec<(usize, usize, Interval)> = Vec::with_capacity(a.nnz() + m.nnz());
    for j in 0..a.ncols {
        for k in a.col_ptr[j]..a.col_ptr[j + 1] {
            t.push((a.row_idx[k], j, a.vals[k]));
        }
    }
    let me = Interval::point(-ell);
    for j in 0..m.ncols {
        for k in m.col_ptr[j]..m.col_ptr[j + 1] {
            t.push((m.row_idx[k], j, m.vals[k] * me));
        }
    }
    sparse::Csc::from_triplets(a.nrows, a.ncols, t)
}

/// Certified upper bound via the conforming Rayleigh quotient at an
/// enclosed divergence-free field: `z_coords` are floating kernel
/// coordinates of an approximate ground state.
pub fn stokes_lambda1_upper(
    kernel: &KernelBasis,
    a: &IvSparse,
    m: &IvSparse,
    t_coords: &[f64],
) -> Result<f64> {
    let t: Vec<Interval> = t_coords.iter().map(|&x| Interval::point(x)).collect();
    let v = kernel.expand(&t);
    let av = a.matvec(&v);
    let mv = m.matvec(&v);
    let num = crate::interval::iv_dot(&v, &av);
    let den = crate::interval::iv_dot(&v, &mv);
    let q = num.div_checked(&den).map_err(|e| {
        Error::VerificationFailed(format!("Rayleigh quotient enclosure degenerate: {e}"))
    })?;
    Ok(q.hi)
}

/// Upward-rounded constants from a certified eigenvalue lower bound:
/// `C_P = lambda^-1/2`, `C_4P = (8/9)^(1/4) lambda^-1/8`,
/// `G = (4 sqrt 6 / 3) lambda^-1/4`.
pub fn derived_constants(lambda1_lower: f64) -> Result<(f64, f64, f64)> {
    if lambda1_lower <= 0.0 {
        return Err(Error::Domain(format!(
            "eigenvalue lower bound must be positive, got {lambda1_lower}"
        )));
    }
    let inv = Interval::ONE.div_checked(&Interval::point(lambda1_lower))?;
    let c_p = inv.sqrt()?.hi;
    let c89 = (Interval::point(8.0) / Interval::point(9.0)).quarter_root()?;
    let c_4p = (c89 * inv.eighth_root()?).hi;
    let c46 = Interval::point(4.0) * Interval::point(6.0).sqrt()? / Interval::point(3.0);
    let g = (c46 * inv.quarter_root()?).hi;
    Ok((c_p, c_4p, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_i64, rat_int};

    #[test]
    fn liu_formula_exact_case() {
        // lambda_h = 100, h = 0.1: 100 / (1 + (0.03804)^2 * 100)
        let h = Interval::point(0.1);
        let got = liu_lower_bound(100.0, h).unwrap();
        let expect = 100.0 / (1.0 + 0.03804f64.powi(2) * 100.0);
        assert!((got - expect).abs() < 1e-10);
        assert!(got < expect + 1e-12); // outward rounding keeps it a lower bound
        assert!(got < 100.0);
    }

    #[test]
    fn derived_constants_cases() {
        // the quoted 4-decimal values are display roundings of these
        let (c_p, _c4p, g) = derived_constants(139.60).unwrap();
        assert!((c_p - 0.0846).abs() <= 5e-5, "c_p {c_p}");
        assert!((g - 0.9502).abs() <= 5e-4, "g {g}");
        let (_, _, g1) = derived_constants(1.0).unwrap();
        let expect = 4.0 * 6.0f64.sqrt() / 3.0;
        assert!(g1 >= expect && g1 < expect * (1.0 + 1e-12));
        assert!(derived_constants(0.0).is_err());
        // antitone in the lower bound
        let (cp_a, c4_a, g_a) = derived_constants(100.0).unwrap();
        let (cp_b, c4_b, g_b) = derived_constants(120.0).unwrap();
        assert!(cp_b <= cp_a && c4_b <= c4_a && g_b <= g_a);
    }

    #[test]
    fn cr_kernel_annihilates_constraints() {
        let domain = BlockDomain::full(2, 1, 1, rat_i64(1, 2));
        let mesh = build_cube_mesh(&domain).unwrap();
        let topo = Topology::build(&mesh);
        let desc = SpaceDescriptor::crouzeix_raviart(Bc::ZeroFacetIntegral, 3);
        let spaces::Space::Scalar(space) = spaces::build_space(&mesh, &topo, &desc).unwrap()
        else {
            unreachable!()
        };
        let rows = cr_constraints(&mesh, &topo, &space).unwrap();
        let kernel = cr_divfree_kernel(&mesh, &topo, &space).unwrap();
        assert_eq!(kernel.dim, 3 * space.n_reduced - (mesh.tets.len() - 1));
        // exact check: every constraint row annihilates every kernel column
        let zd = kernel.z.to_dense();
        for (t, row) in rows.iter().enumerate() {
            for j in 0..kernel.dim {
                let mut s = Interval::ZERO;
                for (dof, v) in row {
                    s += zd[(*dof, j)] * crate::rat::rat_to_interval(v);
                }
                assert!(s.contains(0.0), "constraint {t} column {j}: {s}");
                assert!(s.width() < 1e-12);
            }
        }
    }

    #[test]
    fn constraint_dependency_is_exact() {
        // volume-weighted sum of the constraint rows vanishes identically
        let domain = BlockDomain::full(2, 1, 1, rat_i64(1, 2));
        let mesh = build_cube_mesh(&domain).unwrap();
        let topo = Topology::build(&mesh);
        let desc = SpaceDescriptor::crouzeix_raviart(Bc::ZeroFacetIntegral, 3);
        let spaces::Space::Scalar(space) = spaces::build_space(&mesh, &topo, &desc).unwrap()
        else {
            unreachable!()
        };
        let rows = cr_constraints(&mesh, &topo, &space).unwrap();
        let mut total: std::collections::BTreeMap<usize, Rat> = std::collections::BTreeMap::new();
        for (t, row) in rows.iter().enumerate() {
            let w = mesh.tet_volume(t);
            for (dof, v) in row {
                *total.entry(*dof).or_insert_with(Rat::zero) += v * &w;
            }
        }
        for (_, v) in total {
            assert_eq!(v, rat_int(0));
        }
    }

    #[test]
    fn unit_cube_lower_bound_sane() {
        // unit cube, one refinement: certified bound must sit below the
        // true first Stokes eigenvalue (> 3 pi^2) and above zero
        let domain = BlockDomain::unit_cube(1);
        let report = stokes_lambda1_lower(&domain, 1).unwrap();
        assert!(report.lambda1_lower > 0.0);
        assert!(report.lambda_h1_lower <= report.lambda_h1_approx * (1.0 + 1e-9));
        // Stokes eigenvalue on the unit cube is >= Dirichlet Laplacian 3 pi^2
        assert!(report.lambda1_lower < 62.2, "bound {}", report.lambda1_lower);
        // the Liu correction keeps it strictly below the discrete value
        assert!(report.lambda1_lower < report.lambda_h1_lower);
    }
}

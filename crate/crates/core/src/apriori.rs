//! Hypercircle a-priori constants: the constrained max-min quantity
//! kappa_h, the averaging constant C_0h, and the composed constants
//! C_h = sqrt(kappa_h^2 + C_0h^2), C_hA = C_h / eps.
//!
//! kappa_h is certified from above without ever trusting the floating
//! optimizer: a floating KKT solve produces candidate flux/potential/
//! velocity maps per load-basis vector; the equilibration constraint is
//! then repaired exactly (elementwise zero-mean blocks plus a grounded
//! spanning forest for the elementwise means, all rational), so the
//! repaired maps are feasible for every load. The Gram form of the
//! repaired objective is enclosed by interval congruence, and a shifted
//! interval Cholesky certificate bounds its largest eigenvalue against the
//! load mass matrix. Any feasible map only overestimates the inner
//! minimum, so the certified value dominates the true kappa_h.

use crate::divfree::KernelBasis;
use crate::error::{Error, Result};
use crate::interval::{Interval, IvMat, IvSparse};
use crate::linalg::{chol, eigen, midrad, sparse, verified};
use crate::mesh::{TetMesh, Topology};
use crate::nsolve::MixedSystem;
use crate::polytet::lattice_size;
use crate::rat::{rat_i64, rat_to_interval, Rat};
use crate::spaces::{
    assemble_rt_cross_grad, assemble_rt_mass, assemble_scalar_mass, divergence_rep_rt,
    gradient_rep_scalar, RtSpace, ScalarSpace,
};
use nalgebra::DMatrix;
use num_traits::Zero;

/// Inputs of the kappa_h stage (all borrowed from the pipeline context).
pub struct KappaSetup<'a> {
    pub coarse: &'a TetMesh,
    pub coarse_topo: &'a Topology,
    /// Mixed system on the Scott-Vogelius refinement.
    pub ms: &'a MixedSystem,
    pub kernel: &'a KernelBasis,
    /// Reduced stiffness Z^T A Z.
    pub a_v: &'a IvMat,
    pub rt: &'a RtSpace,
    /// Scalar discontinuous space of degree d on the coarse mesh.
    pub xh: &'a ScalarSpace,
    /// Scalar conforming potential space on the coarse mesh.
    pub phi: &'a ScalarSpace,
}

#[derive(Debug, Clone)]
pub struct KappaResult {
    /// Certified upper bound for kappa_h.
    pub kappa_h: f64,
    /// Floating estimate of the pencil maximum (diagnostics).
    pub lambda_max_float: f64,
    /// Certified eigenvalue bound (kappa_h^2).
    pub beta: f64,
}

/// Exact repair operator for the equilibration constraint
/// `div p + grad phi + f = 0` tested against the discontinuous basis.
struct Repair {
    /// Degree-d lattice size per element.
    lsize: usize,
    n_el: usize,
    /// Per element: chosen interior RT columns (scalar-copy dof ids).
    int_cols: Vec<[usize; 9]>,
    /// Per element: exact inverse of the 9x9 zero-mean block.
    int_inv: Vec<Vec<Vec<Rat>>>,
    /// Per element: mean-row entries over facet columns (col, value).
    mean_entries: Vec<Vec<(usize, Rat)>>,
    /// Per element: slave facet column for the mean row.
    mean_slave: Vec<usize>,
    /// Leaf-to-root processing order of the grounded forest.
    order: Vec<usize>,
    /// Parent element (by tree facet) or None for grounded roots.
    parent: Vec<Option<usize>>,
    /// D entries by column, for propagating corrections into residuals:
    /// col -> Vec<(row, value)> over scalar-copy rows.
    d_by_col: std::collections::BTreeMap<usize, Vec<(usize, Rat)>>,
    /// Element volumes.
    volumes: Vec<Rat>,
}

impl Repair {
    fn build(
        coarse: &TetMesh,
        topo: &Topology,
        rt: &RtSpace,
        d_triplets: &[(usize, usize, Rat)],
        d_deg: u8,
    ) -> Result<Repair> {
        let lsize = lattice_size(d_deg);
        let n_el = coarse.tets.len();
        let facet_dof_count = topo.facets.len() * rt.per_facet;
        let volumes: Vec<Rat> = (0..n_el).map(|t| coarse.tet_volume(t)).collect();

        // group D entries per element row-block and per column
        let mut local: Vec<std::collections::BTreeMap<usize, Vec<Rat>>> =
            (0..n_el).map(|_| std::collections::BTreeMap::new()).collect();
        let mut d_by_col: std::collections::BTreeMap<usize, Vec<(usize, Rat)>> =
            std::collections::BTreeMap::new();
        for (r, c, v) in d_triplets {
            let el = r / lsize;
            let pos = r % lsize;
            local[el]
                .entry(*c)
                .or_insert_with(|| vec![Rat::zero(); lsize])[pos] = v.clone();
            d_by_col.entry(*c).or_default().push((*r, v.clone()));
        }

        // per element: interior 9x9 inverse on the zero-mean rows
        let mut int_cols = Vec::with_capacity(n_el);
        let mut int_inv = Vec::with_capacity(n_el);
        let mut mean_entries = Vec::with_capacity(n_el);
        for el in 0..n_el {
            let cols: Vec<(usize, &Vec<Rat>)> = local[el].iter().map(|(c, v)| (*c, v)).collect();
            // interior columns of this element
            let interior: Vec<(usize, &Vec<Rat>)> = cols
                .iter()
                .filter(|(c, _)| *c >= facet_dof_count)
                .cloned()
                .collect();
            if interior.len() < 9 {
                return Err(Error::Space(format!(
                    "element {el}: expected >= 9 interior flux columns, found {}",
                    interior.len()
                )));
            }
            // zero-mean rows: row_pos - row_last, pos = 0..lsize-1
            let diff_of = |v: &Vec<Rat>| -> Vec<Rat> {
                (0..lsize - 1).map(|p| &v[p] - &v[lsize - 1]).collect()
            };
            // column-pivoted exact elimination to select 9 independent columns
            let work: Vec<(usize, Vec<Rat>)> =
                interior.iter().map(|(c, v)| (*c, diff_of(v))).collect();
            let mut chosen: Vec<usize> = Vec::new();
            let mut mat: Vec<Vec<Rat>> = Vec::new(); // columns of the chosen block
            let mut basis: Vec<Vec<Rat>> = Vec::new(); // eliminated copies
            for row in 0..lsize - 1 {
                // find a column with a pivot in `row` after elimination
                let mut found = None;
                for (ci, (c, v)) in work.iter().enumerate() {
                    if chosen.contains(c) {
                        continue;
                    }
                    let mut w = v.clone();
                    for (k, b) in basis.iter().enumerate() {
                        let f = w[pivot_row(k, &basis)].clone();
                        if !f.is_zero() {
                            for (wi, bi) in w.iter_mut().zip(b) {
                                *wi -= &f * bi;
                            }
                        }
                    }
                    if !w[row].is_zero() {
                        found = Some((ci, w));
                        break;
                    }
                }
                let Some((ci, mut w)) = found else {
                    return Err(Error::Space(format!(
                        "element {el}: interior flux block rank deficient at row {row}"
                    )));
                };
                let c = work[ci].0;
                chosen.push(c);
                mat.push(work[ci].1.clone());
                let piv = w[row].clone();
                for x in w.iter_mut() {
                    *x = &*x / &piv;
                }
                basis.push(w);
            }
            // exact inverse of the 9x9 block (rows 0..9, chosen columns)
            let a: Vec<Vec<Rat>> = (0..lsize - 1)
                .map(|r| mat.iter().map(|col| col[r].clone()).collect())
                .collect();
            let id: Vec<Vec<Rat>> = (0..lsize - 1)
                .map(|r| {
                    (0..lsize - 1)
                        .map(|c| if r == c { crate::rat::rat_int(1) } else { Rat::zero() })
                        .collect()
                })
                .collect();
            let inv = rsolve_or(a, id, el)?;
            int_cols.push(std::array::from_fn(|i| chosen[i]));
            int_inv.push(inv);

            // mean row over facet columns: (vol/ lsize-normalized) sum of rows
            let w = &volumes[el] * rat_i64(1, (lsize as i64) * 1); // vol * (6/((d+1)(d+2)(d+3))) absorbed below
            let unit = Rat::new(
                6.into(),
                (((d_deg as i64) + 1) * ((d_deg as i64) + 2) * ((d_deg as i64) + 3)).into(),
            );
            let scale = &volumes[el] * &unit;
            let mut me = Vec::new();
            for (c, v) in &cols {
                if *c >= facet_dof_count {
                    // interior fluxes have zero boundary flux: exact zero mean
                    let s: Rat = v.iter().fold(Rat::zero(), |acc, x| acc + x);
                    if !(&s * &scale).is_zero() {
                        return Err(Error::Space(format!(
                            "element {el}: interior flux column {c} has nonzero mean"
                        )));
                    }
                    continue;
                }
                let s: Rat = v.iter().fold(Rat::zero(), |acc, x| acc + x);
                let val = s * &scale;
                if !val.is_zero() {
                    me.push((*c, val));
                }
            }
            let _ = w;
            mean_entries.push(me);
        }

        // grounded spanning forest over the dual graph
        let mut parent: Vec<Option<usize>> = vec![None; n_el];
        let mut slave: Vec<usize> = vec![usize::MAX; n_el];
        let mut seen = vec![false; n_el];
        let mut queue = std::collections::VecDeque::new();
        for el in 0..n_el {
            // grounded root: any boundary facet provides a private column
            if let Some(mo) = (0..4).find(|&m| topo.boundary_facet[topo.tet_facets[el][m]]) {
                let f = topo.tet_facets[el][mo];
                slave[el] = f * rt.per_facet;
                seen[el] = true;
                queue.push_back(el);
            }
        }
        if queue.is_empty() {
            return Err(Error::Mesh("no boundary facets: cannot ground the mean rows".into()));
        }
        let mut order_rev = Vec::with_capacity(n_el);
        while let Some(el) = queue.pop_front() {
            order_rev.push(el);
            for m in 0..4 {
                let f = topo.tet_facets[el][m];
                if let [Some(a), Some(b)] = topo.facet_tets[f] {
                    let other = if a == el { b } else { a };
                    if !seen[other] {
                        seen[other] = true;
                        parent[other] = Some(el);
                        slave[other] = f * rt.per_facet;
                        queue.push_back(other);
                    }
                }
            }
        }
        if order_rev.len() != n_el {
            return Err(Error::Mesh("dual graph disconnected".into()));
        }
        // leaf-to-root: reverse BFS order
        let order: Vec<usize> = order_rev.into_iter().rev().collect();
        // the slave coefficient must be present and nonzero in the mean row
        for el in 0..n_el {
            let ok = mean_entries[el].iter().any(|(c, v)| *c == slave[el] && !v.is_zero());
            if !ok {
                return Err(Error::Space(format!("element {el}: mean slave column has zero flux")));
            }
        }
        Ok(Repair {
            lsize,
            n_el,
            int_cols,
            int_inv,
            mean_entries,
            mean_slave: slave,
            order,
            parent,
            d_by_col,
            volumes,
        })
    }

    /// Apply the repair to one residual column (scalar copy): returns the
    /// flux corrections as (column, delta) pairs such that after adding
    /// `D * delta` the residual vanishes for every constraint row.
    fn repair_column(&self, resid: &mut [Interval]) -> Vec<(usize, Interval)> {
        let mut corrections: Vec<(usize, Interval)> = Vec::new();
        // elementwise means of the residual (the mean functional weights
        // every Bernstein coefficient of the element equally)
        let mut mean = vec![Interval::ZERO; self.n_el];
        for el in 0..self.n_el {
            let unit = Rat::new(6.into(), ((2i64 + 1) * (2 + 2) * (2 + 3)).into());
            let scale = rat_to_interval(&(&self.volumes[el] * &unit));
            let mut s = Interval::ZERO;
            for p in 0..self.lsize {
                s += resid[el * self.lsize + p];
            }
            mean[el] = s * scale;
        }
        // tree solve, leaves first
        for &el in &self.order {
            let coef = self
                .mean_entries[el]
                .iter()
                .find(|(c, _)| *c == self.mean_slave[el])
                .expect("validated at build");
            let delta = -(mean[el].div_checked(&rat_to_interval(&coef.1)).expect("nonzero"));
            if let Some(par) = self.parent[el] {
                // the slave facet column also appears in the parent's mean row
                if let Some((_, pv)) = self
                    .mean_entries[par]
                    .iter()
                    .find(|(c, _)| *c == self.mean_slave[el])
                {
                    mean[par] += rat_to_interval(pv) * delta;
                }
            }
            corrections.push((self.mean_slave[el], delta));
            // propagate into the coefficient residual rows
            if let Some(entries) = self.d_by_col.get(&self.mean_slave[el]) {
                for (r, v) in entries {
                    resid[*r] += rat_to_interval(v) * delta;
                }
            }
        }
        // elementwise zero-mean blocks
        for el in 0..self.n_el {
            let base = el * self.lsize;
            let d: Vec<Interval> = (0..self.lsize - 1)
                .map(|p| resid[base + p] - resid[base + self.lsize - 1])
                .collect();
            for r in 0..self.lsize - 1 {
                let mut delta = Interval::ZERO;
                for (k, dk) in d.iter().enumerate() {
                    let f = rat_to_interval(&self.int_inv[el][r][k]);
                    delta += f * *dk;
                }
                let delta = -delta;
                if delta.lo != 0.0 || delta.hi != 0.0 {
                    corrections.push((self.int_cols[el][r], delta));
                }
            }
        }
        corrections
    }
}

fn pivot_row(k: usize, _basis: &[Vec<Rat>]) -> usize {
    k
}

fn rsolve_or(a: Vec<Vec<Rat>>, b: Vec<Vec<Rat>>, el: usize) -> Result<Vec<Vec<Rat>>> {
    crate::rat::rsolve(a, b)
        .ok_or_else(|| Error::Space(format!("element {el}: singular interior block")))
}

/// Certified upper bound for kappa_h.
pub fn compute_kappa_h(setup: &KappaSetup<'_>) -> Result<KappaResult> {
    let rt = setup.rt;
    let xh = setup.xh;
    let phi = setup.phi;
    let ms = setup.ms;
    let kernel = setup.kernel;
    let n_rt = rt.n_scalar;
    let n_comp = 3usize;
    let n_p = n_comp * n_rt;
    let n_u = ms.n_u;
    let n_phi = phi.n_reduced;
    let lsize = lattice_size(xh.desc.degree);
    let nx1 = xh.n_full;
    let n_f = n_comp * nx1;
    let d_deg = xh.desc.degree;

    // exact representation matrices
    let d_trip = divergence_rep_rt(setup.coarse, rt, d_deg);
    let g_trip = gradient_rep_scalar(setup.coarse, phi, d_deg);
    let repair = Repair::build(setup.coarse, setup.coarse_topo, rt, &d_trip, d_deg)?;

    // floating KKT: minimize ||p - grad u||^2 over the constraints
    let m_rt_trip = assemble_rt_mass::<Interval>(setup.coarse, rt);
    let cross_trip =
        assemble_rt_cross_grad::<Interval>(setup.coarse, rt, &ms.mesh, &ms.vel);
    let m_x_trip = assemble_scalar_mass::<Interval>(setup.coarse, xh);

    let nu1 = ms.vel.n_reduced;
    let kdim = n_p + n_u + n_phi + n_f + ms.n_p;
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    // M_RT blocks
    for &(i, j, v) in &m_rt_trip {
        for c in 0..n_comp {
            t.push((c * n_rt + i, c * n_rt + j, v.mid()));
        }
    }
    // cross blocks: -(P_I, grad phi_j) between copy c and velocity comp c
    for &(i, j, v) in &cross_trip {
        for c in 0..n_comp {
            let (r, cc) = (c * n_rt + i, n_p + c * nu1 + j);
            t.push((r, cc, -v.mid()));
            t.push((cc, r, -v.mid()));
        }
    }
    // A_u block
    for j in 0..ms.a_u.ncols {
        for k in ms.a_u.col_ptr[j]..ms.a_u.col_ptr[j + 1] {
            t.push((n_p + ms.a_u.row_idx[k], n_p + j, ms.a_u.vals[k].mid()));
        }
    }
    // equilibration rows: D p + G phi = -f
    let equil_base = n_p + n_u + n_phi;
    for (r, c, v) in &d_trip {
        let el = r / lsize;
        let pos = r % lsize;
        for comp in 0..n_comp {
            let row = equil_base + comp * nx1 + el * lsize + pos;
            let col = comp * n_rt + c;
            let vm = rat_to_interval(v).mid();
            t.push((row, col, vm));
            t.push((col, row, vm));
        }
    }
    for (r, c, v) in &g_trip {
        // rows are comp-major already: comp * n_el * lsize + el * lsize + pos
        let row = equil_base + r;
        let col = n_p + n_u + c;
        let vm = rat_to_interval(v).mid();
        t.push((row, col, vm));
        t.push((col, row, vm));
    }
    // divergence-free rows for u
    let div_base = equil_base + n_f;
    for j in 0..ms.b.ncols {
        for k in ms.b.col_ptr[j]..ms.b.col_ptr[j + 1] {
            let (r, v) = (ms.b.row_idx[k], ms.b.vals[k].mid());
            t.push((div_base + r, n_p + j, v));
            t.push((n_p + j, div_base + r, v));
        }
    }
    let kkt = sparse::Csc::from_triplets(kdim, kdim, t);

    // coordinates for ordering
    let mut coords = vec![[0.0f64; 3]; kdim];
    for c in 0..n_comp {
        for i in 0..n_rt {
            coords[c * n_rt + i] = rt.dof_coords[i];
        }
    }
    for c in 0..n_comp {
        for r in 0..nu1 {
            coords[n_p + c * nu1 + r] = ms.vel.dof_coords[ms.vel.reduced_to_full[r]];
        }
    }
    for i in 0..n_phi {
        coords[n_p + n_u + i] = phi.dof_coords[phi.reduced_to_full[i]];
    }
    for c in 0..n_comp {
        for el in 0..setup.coarse.tets.len() {
            let cc = setup.coarse.centroid_f64(el);
            for pos in 0..lsize {
                coords[equil_base + c * nx1 + el * lsize + pos] = cc;
            }
        }
    }
    for p in 0..ms.n_p {
        coords[div_base + p] = ms.pres.dof_coords[p];
    }
    let perm = sparse::nd_order(&kkt, &coords);
    let scale = 1.0f64;
    let zeta = 1e-9 * scale;
    let mut reg = vec![zeta; kdim];
    for r in reg.iter_mut().take(kdim).skip(equil_base) {
        *r = -zeta;
    }
    let fact = sparse::ldl_factorize(&kkt, &perm, Some(&reg))
        .map_err(|e| Error::Solve(format!("kappa KKT factorization: {e}")))?;

    // solve for all load-basis columns with iterative refinement
    let solve_ir = |rhs: &DMatrix<f64>| -> DMatrix<f64> {
        let mut x = fact.solve_mat(rhs);
        for _ in 0..2 {
            let mut r = kkt.mul_dense(&x);
            r.neg_mut();
            r += rhs;
            let dx = fact.solve_mat(&r);
            x += dx;
        }
        x
    };
    let rhs = {
        let mut m = DMatrix::zeros(kdim, n_f);
        for j in 0..n_f {
            m[(equil_base + j, j)] = -1.0;
        }
        m
    };
    let sol = solve_ir(&rhs);

    // candidate maps
    let p_map = sol.rows(0, n_p).into_owned();
    let u_map = sol.rows(n_p, n_u).into_owned();
    let phi_map = sol.rows(n_p + n_u, n_phi).into_owned();
    drop(sol);

    // kernel coordinates of the velocity map (free rows of u)
    let mut t_map = DMatrix::zeros(kernel.dim, n_f);
    for (j, &c) in kernel.free_cols.iter().enumerate() {
        for col in 0..n_f {
            t_map[(j, col)] = u_map[(c, col)];
        }
    }
    drop(u_map);

    // exact feasibility repair of the flux map, column by column
    // residual rho = D p + G phi + f over the load rows (interval)
    let p_corr = repair_all_columns(
        &repair, &d_trip, &g_trip, &p_map, &phi_map, n_rt, nx1, lsize, n_comp,
    )?;
    drop(p_map);
    drop(phi_map);

    // objective Gram: Theta = [P; T]^T [[M_RT, -CZ], [-(CZ)^T, A_V]] [P; T]
    let m_rt = IvSparse::from_triplets(n_rt, n_rt, m_rt_trip);
    let cross = IvSparse::from_triplets(
        n_rt,
        nu1,
        cross_trip,
    );
    let theta = objective_gram(&p_corr, &t_map, &m_rt, &cross, kernel, setup.a_v, n_rt, nu1)?;

    // load mass matrix (block diagonal over components)
    let m_x1 = IvSparse::from_triplets(nx1, nx1, m_x_trip);

    // floating estimate of the pencil maximum
    let theta_mid = theta.mid();
    let m_x_mid = m_x1.mid_sparse();
    let lam_float = pencil_max_float(&theta_mid, &m_x_mid, nx1, n_comp)?;

    // certified upper bound: beta M_X - Theta positive semidefinite
    let beta = verified::min_certified_upper(lam_float, |beta| {
        let s = shifted_load_form(&theta, &m_x1, beta, nx1, n_comp);
        chol::psd_certify_dense(&s)
    })
    .ok_or_else(|| {
        Error::VerificationFailed(format!(
            "kappa_h certification failed near lambda ~ {lam_float:.6e}"
        ))
    })?;
    let kappa_h = Interval::point(beta).sqrt()?.hi;
    Ok(KappaResult { kappa_h, lambda_max_float: lam_float, beta })
}

#[allow(clippy::too_many_arguments)]
fn repair_all_columns(
    repair: &Repair,
    d_trip: &[(usize, usize, Rat)],
    g_trip: &[(usize, usize, Rat)],
    p_map: &DMatrix<f64>,
    phi_map: &DMatrix<f64>,
    n_rt: usize,
    nx1: usize,
    lsize: usize,
    n_comp: usize,
) -> Result<IvMat> {
    let n_f = n_comp * nx1;
    let n_p = n_comp * n_rt;
    let mut p_corr = IvMat::from_fn(n_p, n_f, |i, j| Interval::point(p_map[(i, j)]));
    // D and G as interval CSCs over scalar-copy indices
    let d_iv = IvSparse::from_triplets(
        nx1,
        n_rt,
        d_trip.iter().map(|(r, c, v)| (*r, *c, rat_to_interval(v))),
    );
    let g_iv = IvSparse::from_triplets(
        n_comp * nx1,
        g_trip.iter().map(|(_, c, _)| *c).max().map_or(0, |m| m + 1),
        g_trip.iter().map(|(r, c, v)| (*r, *c, rat_to_interval(v))),
    );
    let _ = lsize;
    for col in 0..n_f {
        for comp in 0..n_comp {
            // residual of this component copy
            let mut resid = vec![Interval::ZERO; nx1];
            // D p
            let p_col: Vec<Interval> =
                (0..n_rt).map(|i| p_corr[(comp * n_rt + i, col)]).collect();
            let dp = d_iv.matvec(&p_col);
            for (i, v) in dp.into_iter().enumerate() {
                resid[i] += v;
            }
            // G phi (rows comp-major in g_iv)
            let phi_col: Vec<Interval> = (0..phi_map.nrows())
                .map(|i| Interval::point(phi_map[(i, col)]))
                .collect();
            let gphi = g_iv.matvec(&phi_col);
            for i in 0..nx1 {
                resid[i] += gphi[comp * nx1 + i];
            }
            // + f (the load basis vector)
            if col / nx1 == comp {
                resid[col % nx1] += Interval::ONE;
            }
            let corrections = repair.repair_column(&mut resid);
            for (c, delta) in corrections {
                p_corr[(comp * n_rt + c, col)] += delta;
            }
        }
    }
    Ok(p_corr)
}

#[allow(clippy::too_many_arguments)]
fn objective_gram(
    p_corr: &IvMat,
    t_map: &DMatrix<f64>,
    m_rt: &IvSparse,
    cross: &IvSparse,
    kernel: &KernelBasis,
    a_v: &IvMat,
    n_rt: usize,
    nu1: usize,
) -> Result<IvMat> {
    let n_f = p_corr.ncols;
    let n_comp = 3usize;
    let t_iv = IvMat::from_point(t_map);
    // CZ: cross (n_rt x nu1 scalar copy) times kernel columns; the kernel
    // mixes components, so expand blockwise: CZ_full (3 n_rt x dim)
    let mut cz = IvMat::zeros(n_comp * n_rt, kernel.dim);
    {
        // Z rows are component-major over nu1
        for c in 0..n_comp {
            let z_block = IvMat::from_fn(nu1, kernel.dim, |i, j| kernel.z[(c * nu1 + i, j)]);
            let prod = cross.mul_dense(&z_block);
            for i in 0..n_rt {
                for j in 0..kernel.dim {
                    cz[(c * n_rt + i, j)] = prod[(i, j)];
                }
            }
        }
    }
    // E1 = M_RT P - CZ T ; E2 = -(CZ)^T P + A_V T
    let mut mp = IvMat::zeros(n_comp * n_rt, n_f);
    for c in 0..n_comp {
        let p_block = IvMat::from_fn(n_rt, n_f, |i, j| p_corr[(c * n_rt + i, j)]);
        let prod = m_rt.mul_dense(&p_block);
        for i in 0..n_rt {
            for j in 0..n_f {
                mp[(c * n_rt + i, j)] = prod[(i, j)];
            }
        }
    }
    let czt = midrad::iv_gemm(&cz, &t_iv);
    let e1 = mp.sub(&czt);
    let ctp = midrad::iv_gemm_tn(&cz, p_corr);
    let avt = midrad::iv_gemm(a_v, &t_iv);
    let e2 = avt.sub(&ctp);
    // Theta = P^T E1 + T^T E2 (grouping of the symmetric congruence)
    let th1 = midrad::iv_gemm_tn(p_corr, &e1);
    let th2 = midrad::iv_gemm_tn(&t_iv, &e2);
    Ok(th1.add(&th2).hull_sym())
}

fn pencil_max_float(
    theta_mid: &DMatrix<f64>,
    m_x_mid: &sparse::Csc<f64>,
    nx1: usize,
    n_comp: usize,
) -> Result<f64> {
    let n_f = n_comp * nx1;
    // factor the block-diagonal mass once
    let perm = sparse::identity_perm(nx1);
    let m_fact = sparse::ldl_factorize(m_x_mid, &perm, None)
        .map_err(|e| Error::Solve(format!("load mass factorization: {e}")))?;
    let res = eigen::lanczos_sym(
        n_f,
        40.min(n_f),
        91,
        |x| {
            // M^-1 Theta x
            let tx = theta_mid * DMatrix::from_column_slice(n_f, 1, x);
            let mut out = vec![0.0; n_f];
            for c in 0..n_comp {
                let mut blk: Vec<f64> = (0..nx1).map(|i| tx[(c * nx1 + i, 0)]).collect();
                m_fact.solve(&mut blk);
                out[c * nx1..(c + 1) * nx1].copy_from_slice(&blk);
            }
            out
        },
        |x, y| {
            // M-inner product
            let mut s = 0.0;
            for c in 0..n_comp {
                let mut my = vec![0.0; nx1];
                m_x_mid.matvec(&y[c * nx1..(c + 1) * nx1], &mut my);
                s += x[c * nx1..(c + 1) * nx1]
                    .iter()
                    .zip(&my)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            s
        },
    )?;
    Ok(*res.values.last().unwrap())
}

fn shifted_load_form(
    theta: &IvMat,
    m_x1: &IvSparse,
    beta: f64,
    nx1: usize,
    n_comp: usize,
) -> IvMat {
    let n_f = n_comp * nx1;
    let b = Interval::point(beta);
    let mut s = theta.scale(Interval::point(-1.0));
    for c in 0..n_comp {
        for j in 0..nx1 {
            for k in m_x1.col_ptr[j]..m_x1.col_ptr[j + 1] {
                let i = m_x1.row_idx[k];
                s[(c * nx1 + i, c * nx1 + j)] += b * m_x1.vals[k];
            }
        }
    }
    let _ = n_f;
    s
}

/// The closed-form averaging constant `0.284 h` (h: sub-cube edge length),
/// rounded upward.
pub fn compute_c0h(h_cube: &Rat) -> Result<f64> {
    let c = Interval::from_decimal("0.284")?;
    Ok((c * rat_to_interval(h_cube)).hi)
}

#[derive(Debug, Clone)]
pub struct AprioriReport {
    pub kappa_h: f64,
    pub c0h: f64,
    pub c0h_overridden: bool,
    pub c_h: f64,
    pub c_ha: f64,
    /// The L2-projection constant `C_h^2 / eps`.
    pub c_h_sq_over_eps: f64,
}

/// Compose `C_h = sqrt(kappa^2 + C_0h^2)` and `C_hA = C_h / eps` upward.
pub fn compose_constants(
    kappa_h: f64,
    c0h: f64,
    c0h_overridden: bool,
    eps: Interval,
) -> Result<AprioriReport> {
    if kappa_h < 0.0 || c0h < 0.0 {
        return Err(Error::Domain("negative constant".into()));
    }
    if eps.lo <= 0.0 {
        return Err(Error::Domain("viscosity must be positive".into()));
    }
    let k = Interval::point(kappa_h);
    let c0 = Interval::point(c0h);
    let s = k.square() + c0.square();
    // a sum of squares is nonnegative; outward rounding may dip below zero
    let c_h_iv = Interval::new(s.lo.max(0.0), s.hi.max(0.0)).sqrt()?;
    let c_h = c_h_iv.hi;
    let c_ha = c_h_iv.div_checked(&eps)?.hi;
    let c_h_sq_over_eps = c_h_iv.square().div_checked(&eps)?.hi;
    Ok(AprioriReport { kappa_h, c0h, c0h_overridden, c_h, c_ha, c_h_sq_over_eps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0h_formula() {
        let h = rat_i64(1, 4);
        let c = compute_c0h(&h).unwrap();
        assert!(c >= 0.071 && c < 0.0710001);
        let h1 = rat_i64(1, 1);
        let c1 = compute_c0h(&h1).unwrap();
        assert!((c1 - 0.284).abs() < 1e-12);
        // halving h halves the constant
        let c2 = compute_c0h(&rat_i64(1, 2)).unwrap();
        assert!((c2 - 0.142).abs() < 1e-12);
    }

    #[test]
    fn compose_cases() {
        // paper numbers: kappa = 0.0583, C0h = 0.0625 -> C_h <= 0.08548
        let rep =
            compose_constants(0.0583, 0.0625, true, Interval::point(0.25)).unwrap();
        assert!(rep.c_h <= 0.08548);
        assert!(rep.c_h >= 0.08547);
        assert!(rep.c_ha <= 0.34192);
        assert!((rep.c_ha - rep.c_h / 0.25).abs() < 1e-12);
        // zero inputs give zero
        let rep0 = compose_constants(0.0, 0.0, false, Interval::point(0.25)).unwrap();
        assert_eq!(rep0.c_h, 0.0);
        assert!(compose_constants(0.1, 0.1, false, Interval::point(0.0)).is_err());
    }
}

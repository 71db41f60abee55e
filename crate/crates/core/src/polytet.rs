//! Bernstein-form polynomial calculus on tetrahedra.
//!
//! Polynomials live in barycentric coordinates (u, v, w, t):
//! `B^N_ijkl = N!/(i!j!k!l!) u^i v^j w^k t^l` with `i+j+k+l = N`.
//! Products, integrals, derivatives, degree raising and de Casteljau
//! subdivision are all exact rational operations on coefficients; the
//! calculus is generic over the coefficient ring so the same code runs in
//! exact mode (structural identities) and interval mode (assembly).
//!
//! The only geometric inputs are the element volume and the constant
//! barycentric gradients, both exact rationals from the mesh.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::rat::{rat_i64, rat_int, rat_to_interval, rdet3, rpoint_sub, rsolve, Rat, RPoint};
use num_traits::{Signed, Zero};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub type MultiIndex = [u8; 4];

/// Coefficient ring: exact rationals or intervals.
pub trait Coeff: Clone + Send + Sync + 'static {
    fn c_zero() -> Self;
    fn c_add(&mut self, o: &Self);
    fn c_sub(&self, o: &Self) -> Self;
    fn c_mul(&self, o: &Self) -> Self;
    /// Multiply by a precomputed exact rational table factor.
    fn mul_tab(&self, f: &TabFactor) -> Self;
    fn from_rat(r: &Rat) -> Self;
    fn c_neg(&self) -> Self;
    fn c_is_zero(&self) -> bool;
}

/// An exact rational factor with its interval image, cached together so the
/// interval mode never re-rounds table constants.
#[derive(Clone, Debug)]
pub struct TabFactor {
    pub rat: Rat,
    pub iv: Interval,
}

impl TabFactor {
    pub fn new(rat: Rat) -> Self {
        let iv = rat_to_interval(&rat);
        TabFactor { rat, iv }
    }
}

impl Coeff for Rat {
    fn c_zero() -> Self {
        Rat::zero()
    }
    fn c_add(&mut self, o: &Self) {
        *self += o;
    }
    fn c_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn mul_tab(&self, f: &TabFactor) -> Self {
        self * &f.rat
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn c_neg(&self) -> Self {
        -self
    }
    fn c_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

impl Coeff for Interval {
    fn c_zero() -> Self {
        Interval::ZERO
    }
    fn c_add(&mut self, o: &Self) {
        *self += *o;
    }
    fn c_sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn c_mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn mul_tab(&self, f: &TabFactor) -> Self {
        *self * f.iv
    }
    fn from_rat(r: &Rat) -> Self {
        rat_to_interval(r)
    }
    fn c_neg(&self) -> Self {
        -*self
    }
    fn c_is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

/// Plain floating coefficients for the approximation phase; no rigor claim.
impl Coeff for f64 {
    fn c_zero() -> Self {
        0.0
    }
    fn c_add(&mut self, o: &Self) {
        *self += o;
    }
    fn c_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn c_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn mul_tab(&self, f: &TabFactor) -> Self {
        self * f.iv.mid()
    }
    fn from_rat(r: &Rat) -> Self {
        rat_to_interval(r).mid()
    }
    fn c_neg(&self) -> Self {
        -self
    }
    fn c_is_zero(&self) -> bool {
        *self == 0.0
    }
}

/// Simplex lattice of a given degree, with index lookup.
pub struct Lattice {
    pub degree: u8,
    pub indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl Lattice {
    fn build(degree: u8) -> Lattice {
        let n = degree as i32;
        let mut indices = Vec::new();
        for i in (0..=n).rev() {
            for j in (0..=n - i).rev() {
                for k in (0..=n - i - j).rev() {
                    let l = n - i - j - k;
                    indices.push([i as u8, j as u8, k as u8, l as u8]);
                }
            }
        }
        let lookup = indices.iter().enumerate().map(|(p, &a)| (a, p)).collect();
        Lattice { degree, indices, lookup }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn index(&self, a: &MultiIndex) -> usize {
        self.lookup[a]
    }
}

static LATTICES: OnceLock<Mutex<HashMap<u8, Arc<Lattice>>>> = OnceLock::new();

pub fn lattice(degree: u8) -> Arc<Lattice> {
    let map = LATTICES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    guard
        .entry(degree)
        .or_insert_with(|| Arc::new(Lattice::build(degree)))
        .clone()
}

pub fn lattice_size(degree: u8) -> usize {
    let n = degree as usize;
    (n + 1) * (n + 2) * (n + 3) / 6
}

fn factorial(n: u8) -> i128 {
    (1..=n as i128).product()
}

/// N! / (i! j! k! l!)
pub fn multinomial(a: &MultiIndex) -> i128 {
    let n = a[0] + a[1] + a[2] + a[3];
    factorial(n) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]) * factorial(a[3]))
}

/// Exact value of the barycentric monomial integral over a tetrahedron:
/// `6 |K| i! j! k! l! / (i+j+k+l+3)!`.
pub fn integrate_monomial(volume: &Rat, i: u8, j: u8, k: u8, l: u8) -> Rat {
    let n = i + j + k + l;
    let num = 6 * factorial(i) * factorial(j) * factorial(k) * factorial(l);
    let den = factorial(n + 3);
    volume * Rat::new(num.into(), den.into())
}

/// Polynomial in Bernstein form on the reference barycentric simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct BernsteinPoly<C: Coeff> {
    pub degree: u8,
    /// Coefficients in `lattice(degree)` order.
    pub coeffs: Vec<C>,
}

impl<C: Coeff> BernsteinPoly<C> {
    pub fn zero(degree: u8) -> Self {
        BernsteinPoly { degree, coeffs: vec![C::c_zero(); lattice_size(degree)] }
    }

    pub fn constant(degree: u8, value: C) -> Self {
        // constant c equals c times the sum of all basis functions
        BernsteinPoly { degree, coeffs: vec![value; lattice_size(degree)] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.c_is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.degree, o.degree);
        let mut out = self.clone();
        for (c, d) in out.coeffs.iter_mut().zip(&o.coeffs) {
            c.c_add(d);
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.degree, o.degree);
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(c, d)| c.c_sub(d)).collect();
        BernsteinPoly { degree: self.degree, coeffs }
    }

    pub fn scale(&self, s: &C) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.c_mul(s)).collect();
        BernsteinPoly { degree: self.degree, coeffs }
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let f = TabFactor::new(r.clone());
        let coeffs = self.coeffs.iter().map(|c| c.mul_tab(&f)).collect();
        BernsteinPoly { degree: self.degree, coeffs }
    }

    /// Evaluate at a barycentric point by the de Casteljau algorithm
    /// (numerically the sound choice in interval mode).
    pub fn eval(&self, bary: &[C; 4]) -> C {
        let mut level: Vec<C> = self.coeffs.clone();
        let mut deg = self.degree;
        let mut cur = lattice(deg);
        while deg > 0 {
            let next = lattice(deg - 1);
            let mut reduced = vec![C::c_zero(); next.len()];
            for (pos, beta) in next.indices.iter().enumerate() {
                let mut acc = C::c_zero();
                for m in 0..4 {
                    let mut up = *beta;
                    up[m] += 1;
                    let t = level[cur.index(&up)].c_mul(&bary[m]);
                    acc.c_add(&t);
                }
                reduced[pos] = acc;
            }
            level = reduced;
            cur = next;
            deg -= 1;
        }
        level.into_iter().next().unwrap()
    }

    /// Exact integral over an element of the given volume.
    pub fn integrate(&self, volume_factor: &TabFactor) -> C {
        // every degree-N basis function integrates to the same value
        let n = self.degree as i64;
        let unit = Rat::new(6.into(), ((n + 1) * (n + 2) * (n + 3)).into());
        let f = TabFactor::new(unit);
        let mut s = C::c_zero();
        for c in &self.coeffs {
            s.c_add(c);
        }
        s.mul_tab(&f).mul_tab(volume_factor)
    }

    /// Raise the representation degree by one; values are unchanged.
    pub fn degree_raise(&self) -> Self {
        let n = self.degree;
        let lat = lattice(n);
        let out_lat = lattice(n + 1);
        let mut out = vec![C::c_zero(); out_lat.len()];
        let denom = rat_int((n as i64) + 1);
        for (pos, gamma) in out_lat.indices.iter().enumerate() {
            let mut acc = C::c_zero();
            for m in 0..4 {
                if gamma[m] == 0 {
                    continue;
                }
                let mut down = *gamma;
                down[m] -= 1;
                let f = TabFactor::new(rat_int(gamma[m] as i64) / &denom);
                let t = self.coeffs[lat.index(&down)].mul_tab(&f);
                acc.c_add(&t);
            }
            out[pos] = acc;
        }
        BernsteinPoly { degree: n + 1, coeffs: out }
    }

    pub fn raise_to(&self, degree: u8) -> Self {
        assert!(degree >= self.degree);
        let mut p = self.clone();
        while p.degree < degree {
            p = p.degree_raise();
        }
        p
    }

    /// Coefficients of the restriction to a sub-simplex whose vertices are
    /// given in parent barycentric coordinates (rows of `sub`), via the
    /// multi-affine blossom.
    pub fn subdivide(&self, sub: &[[C; 4]; 4]) -> Self {
        let n = self.degree;
        let out_lat = lattice(n);
        let mut out = Vec::with_capacity(out_lat.len());
        for beta in &out_lat.indices {
            // de Casteljau: beta[m] steps with argument sub[m]
            let mut level = self.coeffs.clone();
            let mut deg = n;
            for m in 0..4 {
                for _ in 0..beta[m] {
                    let cur = lattice(deg);
                    let next = lattice(deg - 1);
                    let mut reduced = vec![C::c_zero(); next.len()];
                    for (pos, b) in next.indices.iter().enumerate() {
                        let mut acc = C::c_zero();
                        for d in 0..4 {
                            let mut up = *b;
                            up[d] += 1;
                            let t = level[cur.index(&up)].c_mul(&sub[m][d]);
                            acc.c_add(&t);
                        }
                        reduced[pos] = acc;
                    }
                    level = reduced;
                    deg -= 1;
                }
            }
            debug_assert_eq!(deg, 0);
            out.push(level.into_iter().next().unwrap());
        }
        BernsteinPoly { degree: n, coeffs: out }
    }

    /// Restriction to the facet `lambda_m = 0`: the coefficients with
    /// `alpha_m = 0`, in the lattice order of the remaining indices.
    pub fn facet_trace(&self, m: usize) -> Vec<C> {
        let lat = lattice(self.degree);
        lat.indices
            .iter()
            .enumerate()
            .filter(|(_, a)| a[m] == 0)
            .map(|(p, _)| self.coeffs[p].clone())
            .collect()
    }
}

/// Product coefficient tables, cached per degree pair.
struct ProductTable {
    /// For each (a_pos, b_pos): output position and factor.
    entries: Vec<(u32, TabFactor)>,
    b_len: usize,
    out_degree: u8,
}

static PRODUCT_TABLES: OnceLock<Mutex<HashMap<(u8, u8), Arc<ProductTable>>>> = OnceLock::new();

fn product_table(da: u8, db: u8) -> Arc<ProductTable> {
    let map = PRODUCT_TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    guard
        .entry((da, db))
        .or_insert_with(|| {
            let la = lattice(da);
            let lb = lattice(db);
            let lo = lattice(da + db);
            let mut entries = Vec::with_capacity(la.len() * lb.len());
            for a in &la.indices {
                for b in &lb.indices {
                    let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
                    let f = Rat::new(
                        (multinomial(a) * multinomial(b)).into(),
                        multinomial(&sum).into(),
                    );
                    entries.push((lo.index(&sum) as u32, TabFactor::new(f)));
                }
            }
            Arc::new(ProductTable { entries, b_len: lb.len(), out_degree: da + db })
        })
        .clone()
}

/// Bernstein-form product: `B^M_a B^N_b = (C(M,a) C(N,b) / C(M+N,a+b)) B^{M+N}_{a+b}`.
pub fn poly_mul<C: Coeff>(p: &BernsteinPoly<C>, q: &BernsteinPoly<C>) -> BernsteinPoly<C> {
    let tab = product_table(p.degree, q.degree);
    let mut out = vec![C::c_zero(); lattice_size(tab.out_degree)];
    for (ia, ca) in p.coeffs.iter().enumerate() {
        if ca.c_is_zero() {
            continue;
        }
        let base = ia * tab.b_len;
        for (ib, cb) in q.coeffs.iter().enumerate() {
            if cb.c_is_zero() {
                continue;
            }
            let (pos, f) = &tab.entries[base + ib];
            let t = ca.c_mul(cb).mul_tab(f);
            out[*pos as usize].c_add(&t);
        }
    }
    BernsteinPoly { degree: tab.out_degree, coeffs: out }
}

/// Integral of a product over an element of the given volume.
pub fn poly_product_integral<C: Coeff>(
    p: &BernsteinPoly<C>,
    q: &BernsteinPoly<C>,
    volume: &TabFactor,
) -> C {
    poly_mul(p, q).integrate(volume)
}

/// Exact element geometry: volume and the constant barycentric gradients.
#[derive(Clone, Debug)]
pub struct TetGeom {
    pub volume: Rat,
    pub volume_tab: TabFactor,
    /// `grads[m][c]` = d lambda_m / d x_c, exact.
    pub grads: [[Rat; 3]; 4],
    pub grads_tab: Vec<[TabFactor; 3]>,
}

impl TetGeom {
    pub fn new(v: [&RPoint; 4]) -> Result<TetGeom> {
        let e1 = rpoint_sub(v[1], v[0]);
        let e2 = rpoint_sub(v[2], v[0]);
        let e3 = rpoint_sub(v[3], v[0]);
        let det = rdet3(&e1, &e2, &e3);
        if det.is_zero() {
            return Err(Error::Geometry("degenerate tetrahedron".into()));
        }
        let volume = &det / rat_int(6);
        if volume.is_negative() {
            return Err(Error::Geometry("negatively oriented tetrahedron".into()));
        }
        // rows of J^-1 are the gradients of lambda_1..lambda_3
        let a: Vec<Vec<Rat>> = (0..3)
            .map(|r| vec![e1[r].clone(), e2[r].clone(), e3[r].clone()])
            .collect();
        let rhs: Vec<Vec<Rat>> = (0..3)
            .map(|r| (0..3).map(|c| if r == c { rat_int(1) } else { Rat::zero() }).collect())
            .collect();
        let inv = rsolve(a, rhs).ok_or_else(|| Error::Geometry("singular Jacobian".into()))?;
        let mut grads: [[Rat; 3]; 4] = Default::default();
        for m in 1..4 {
            for c in 0..3 {
                grads[m][c] = inv[m - 1][c].clone();
            }
        }
        for c in 0..3 {
            grads[0][c] = -(&grads[1][c] + &grads[2][c] + &grads[3][c]);
        }
        let grads_tab = grads
            .iter()
            .map(|g| {
                [
                    TabFactor::new(g[0].clone()),
                    TabFactor::new(g[1].clone()),
                    TabFactor::new(g[2].clone()),
                ]
            })
            .collect();
        let volume_tab = TabFactor::new(volume.clone());
        Ok(TetGeom { volume, volume_tab, grads, grads_tab })
    }

    pub fn from_mesh(mesh: &crate::mesh::TetMesh, t: usize) -> Result<TetGeom> {
        let [a, b, c, d] = mesh.tets[t];
        TetGeom::new([
            &mesh.vertices[a],
            &mesh.vertices[b],
            &mesh.vertices[c],
            &mesh.vertices[d],
        ])
    }
}

/// Cartesian partial derivative d/dx_c of a Bernstein polynomial.
pub fn poly_deriv<C: Coeff>(p: &BernsteinPoly<C>, geom: &TetGeom, c: usize) -> BernsteinPoly<C> {
    assert!(p.degree >= 1);
    let n = p.degree;
    let lat = lattice(n);
    let out_lat = lattice(n - 1);
    let nf = TabFactor::new(rat_int(n as i64));
    let mut out = vec![C::c_zero(); out_lat.len()];
    for (pos, beta) in out_lat.indices.iter().enumerate() {
        let mut acc = C::c_zero();
        for m in 0..4 {
            let mut up = *beta;
            up[m] += 1;
            let t = p.coeffs[lat.index(&up)].mul_tab(&geom.grads_tab[m][c]);
            acc.c_add(&t);
        }
        out[pos] = acc.mul_tab(&nf);
    }
    BernsteinPoly { degree: n - 1, coeffs: out }
}

/// Gradient of a scalar polynomial: three degree-(N-1) components.
pub fn poly_grad<C: Coeff>(p: &BernsteinPoly<C>, geom: &TetGeom) -> [BernsteinPoly<C>; 3] {
    [
        poly_deriv(p, geom, 0),
        poly_deriv(p, geom, 1),
        poly_deriv(p, geom, 2),
    ]
}

/// Divergence of a vector polynomial.
pub fn poly_div<C: Coeff>(v: &[BernsteinPoly<C>; 3], geom: &TetGeom) -> BernsteinPoly<C> {
    let mut d = poly_deriv(&v[0], geom, 0);
    d = d.add(&poly_deriv(&v[1], geom, 1));
    d.add(&poly_deriv(&v[2], geom, 2))
}

/// The 8 children of the barycentric red split of the reference simplex,
/// as parent-barycentric vertex rows.
pub fn red_children_bary() -> Vec<[[Rat; 4]; 4]> {
    let e = |m: usize| -> [Rat; 4] {
        let mut v = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
        v[m] = rat_int(1);
        v
    };
    let mid = |a: usize, b: usize| -> [Rat; 4] {
        let mut v = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
        v[a] = rat_i64(1, 2);
        v[b] = rat_i64(1, 2);
        v
    };
    let (m01, m02, m03) = (mid(0, 1), mid(0, 2), mid(0, 3));
    let (m12, m13, m23) = (mid(1, 2), mid(1, 3), mid(2, 3));
    vec![
        [e(0), m01.clone(), m02.clone(), m03.clone()],
        [m01.clone(), e(1), m12.clone(), m13.clone()],
        [m02.clone(), m12.clone(), e(2), m23.clone()],
        [m03.clone(), m13.clone(), m23.clone(), e(3)],
        // octahedron around the (m02, m13) diagonal
        [m02.clone(), m13.clone(), m01.clone(), m03.clone()],
        [m02.clone(), m13.clone(), m03.clone(), m23.clone()],
        [m02.clone(), m13.clone(), m23.clone(), m12.clone()],
        [m02, m13, m12, m01],
    ]
}

pub fn to_coeff_bary<C: Coeff>(b: &[[Rat; 4]; 4]) -> [[C; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| C::from_rat(&b[i][j])))
}

/// Certified bound pair for the sup norm of one polynomial:
/// `upper` dominates `max |p|` for every member of the coefficient box,
/// `witness` is a point-evaluation lower bound.
#[derive(Debug, Clone, Copy)]
pub struct SupBound {
    pub upper: f64,
    pub witness: f64,
}

/// Convex-hull sup-norm bound with de Casteljau refinement.
///
/// At depth 0 the bound is `max |coeff|`; each level subdivides every cell
/// into the 8 red children and takes the hull max again, tightening
/// monotonically toward the true sup norm.
pub fn sup_norm_bound(p: &BernsteinPoly<Interval>, refine_depth: usize) -> SupBound {
    let children = red_children_bary();
    let children: Vec<[[Interval; 4]; 4]> = children.iter().map(to_coeff_bary).collect();
    let mut cells = vec![p.clone()];
    for _ in 0..refine_depth {
        let mut next = Vec::with_capacity(cells.len() * 8);
        for cell in &cells {
            for ch in &children {
                next.push(cell.subdivide(ch));
            }
        }
        cells = next;
    }
    let mut upper = 0.0f64;
    let mut witness = 0.0f64;
    let lat = lattice(p.degree);
    for cell in &cells {
        for c in &cell.coeffs {
            upper = upper.max(c.mag());
        }
        // vertex coefficients are point values: certified evaluations
        for (pos, a) in lat.indices.iter().enumerate() {
            if a.contains(&p.degree) {
                witness = witness.max(cell.coeffs[pos].mig());
            }
        }
    }
    SupBound { upper, witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn unit_geom() -> TetGeom {
        let v0 = [rat_int(0), rat_int(0), rat_int(0)];
        let v1 = [rat_int(1), rat_int(0), rat_int(0)];
        let v2 = [rat_int(0), rat_int(1), rat_int(0)];
        let v3 = [rat_int(0), rat_int(0), rat_int(1)];
        TetGeom::new([&v0, &v1, &v2, &v3]).unwrap()
    }

    #[test]
    fn monomial_integrals_match_cases() {
        let one = rat_int(1);
        assert_eq!(integrate_monomial(&one, 0, 0, 0, 0), rat_int(1));
        assert_eq!(integrate_monomial(&one, 1, 0, 0, 0), rat_i64(1, 4));
        assert_eq!(integrate_monomial(&one, 1, 1, 0, 0), rat_i64(1, 20));
    }

    #[test]
    fn product_integral_cases() {
        let vol = TabFactor::new(rat_int(1));
        let one: BernsteinPoly<Rat> = BernsteinPoly::constant(0, rat_int(1));
        assert_eq!(poly_product_integral(&one, &one, &vol), rat_int(1));
        // p = u (lambda_0), q = v (lambda_1), each degree 1
        let lat1 = lattice(1);
        let mut u = BernsteinPoly::<Rat>::zero(1);
        u.coeffs[lat1.index(&[1, 0, 0, 0])] = rat_int(1);
        let mut v = BernsteinPoly::<Rat>::zero(1);
        v.coeffs[lat1.index(&[0, 1, 0, 0])] = rat_int(1);
        assert_eq!(poly_product_integral(&u, &v, &vol), rat_i64(1, 20));
    }

    #[test]
    fn gradient_of_linear_field() {
        let geom = unit_geom();
        // x = lambda_1 on the unit tet
        let lat1 = lattice(1);
        let mut x = BernsteinPoly::<Rat>::zero(1);
        x.coeffs[lat1.index(&[0, 1, 0, 0])] = rat_int(1);
        let g = poly_grad(&x, &geom);
        assert_eq!(g[0].coeffs[0], rat_int(1));
        assert!(g[1].is_zero() && g[2].is_zero());
        // divergence of the identity field (x, y, z) is 3
        let mut y = BernsteinPoly::<Rat>::zero(1);
        y.coeffs[lat1.index(&[0, 0, 1, 0])] = rat_int(1);
        let mut z = BernsteinPoly::<Rat>::zero(1);
        z.coeffs[lat1.index(&[0, 0, 0, 1])] = rat_int(1);
        let d = poly_div(&[x, y, z], &geom);
        assert_eq!(d.coeffs[0], rat_int(3));
        // constant field has zero gradient
        let c: BernsteinPoly<Rat> = BernsteinPoly::constant(2, rat_int(7));
        for comp in poly_grad(&c, &geom) {
            assert!(comp.is_zero());
        }
    }

    #[test]
    fn degree_raise_preserves_values() {
        let mut rng = StdRng::seed_from_u64(5);
        let p = BernsteinPoly::<Rat> {
            degree: 2,
            coeffs: (0..lattice_size(2)).map(|_| rat_i64(rng.gen_range(-9..9), 4)).collect(),
        };
        let q = p.degree_raise();
        assert_eq!(q.degree, 3);
        for _ in 0..20 {
            let mut b = [
                rat_i64(rng.gen_range(0..5), 7),
                rat_i64(rng.gen_range(0..5), 7),
                rat_i64(rng.gen_range(0..5), 7),
                Rat::zero(),
            ];
            b[3] = rat_int(1) - &b[0] - &b[1] - &b[2];
            if b[3].is_negative() {
                continue;
            }
            assert_eq!(p.eval(&b), q.eval(&b));
        }
    }

    #[test]
    fn subdivision_agrees_with_parent() {
        let mut rng = StdRng::seed_from_u64(9);
        let p = BernsteinPoly::<Rat> {
            degree: 3,
            coeffs: (0..lattice_size(3)).map(|_| rat_i64(rng.gen_range(-9..9), 8)).collect(),
        };
        for child in red_children_bary().iter().take(5) {
            let sub: [[Rat; 4]; 4] = child.clone();
            let restricted = p.subdivide(&sub);
            for _ in 0..20 {
                let mut w = [
                    rat_i64(rng.gen_range(0..4), 9),
                    rat_i64(rng.gen_range(0..4), 9),
                    rat_i64(rng.gen_range(0..4), 9),
                    Rat::zero(),
                ];
                w[3] = rat_int(1) - &w[0] - &w[1] - &w[2];
                if w[3].is_negative() {
                    continue;
                }
                // parent barycentric of the child point
                let mut parent_b = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
                for m in 0..4 {
                    for d in 0..4 {
                        parent_b[d] += &w[m] * &sub[m][d];
                    }
                }
                assert_eq!(restricted.eval(&w), p.eval(&parent_b));
            }
        }
    }

    #[test]
    fn sup_norm_constant_and_coordinate() {
        let two: BernsteinPoly<Interval> = BernsteinPoly::constant(2, Interval::point(2.0));
        let b = sup_norm_bound(&two, 0);
        assert!(b.upper >= 2.0 && b.upper < 2.0 + 1e-12);
        assert!(b.witness <= 2.0 && b.witness > 2.0 - 1e-12);

        // p = u: sup over the simplex is 1; hull bound tightens to 1
        let lat1 = lattice(1);
        let mut u = BernsteinPoly::<Interval>::zero(1);
        u.coeffs[lat1.index(&[1, 0, 0, 0])] = Interval::ONE;
        let b0 = sup_norm_bound(&u, 0);
        assert!(b0.upper >= 1.0);
        let b3 = sup_norm_bound(&u, 3);
        assert!(b3.upper >= 1.0 && b3.upper <= 1.0 + 1e-10);
        assert!(b3.witness >= 1.0 - 1e-12);
    }

    #[test]
    fn sup_norm_dominates_sampling_and_tightens() {
        let mut rng = StdRng::seed_from_u64(13);
        let p = BernsteinPoly::<Interval> {
            degree: 2,
            coeffs: (0..lattice_size(2))
                .map(|_| Interval::point(rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let mut smax = 0.0f64;
        for _ in 0..2000 {
            let mut b = [0.0f64; 4];
            let mut rest = 1.0;
            for item in b.iter_mut().take(3) {
                *item = rng.gen_range(0.0..rest);
                rest -= *item;
            }
            b[3] = rest;
            let biv = [
                Interval::point(b[0]),
                Interval::point(b[1]),
                Interval::point(b[2]),
                Interval::point(b[3]),
            ];
            smax = smax.max(p.eval(&biv).mag());
        }
        let b1 = sup_norm_bound(&p, 1);
        let b3 = sup_norm_bound(&p, 3);
        assert!(b1.upper >= smax);
        assert!(b3.upper >= smax);
        assert!(b3.upper <= b1.upper + 1e-15);
        let gap1 = b1.upper - b1.witness;
        let gap3 = b3.upper - b3.witness;
        assert!(gap3 <= gap1 * 0.5 + 1e-12, "gap1 {gap1} gap3 {gap3}");
    }

    #[test]
    fn interval_product_contains_exact() {
        let mut rng = StdRng::seed_from_u64(21);
        let pr = BernsteinPoly::<Rat> {
            degree: 2,
            coeffs: (0..lattice_size(2)).map(|_| rat_i64(rng.gen_range(-20..20), 16)).collect(),
        };
        let qr = BernsteinPoly::<Rat> {
            degree: 3,
            coeffs: (0..lattice_size(3)).map(|_| rat_i64(rng.gen_range(-20..20), 16)).collect(),
        };
        let pi = BernsteinPoly::<Interval> {
            degree: 2,
            coeffs: pr.coeffs.iter().map(Interval::from_rat).collect(),
        };
        let qi = BernsteinPoly::<Interval> {
            degree: 3,
            coeffs: qr.coeffs.iter().map(Interval::from_rat).collect(),
        };
        let exact = poly_mul(&pr, &qr);
        let boxed = poly_mul(&pi, &qi);
        for (e, b) in exact.coeffs.iter().zip(&boxed.coeffs) {
            assert!(crate::rat::cmp_rat_f64(e, b.lo) != std::cmp::Ordering::Less);
            assert!(crate::rat::cmp_rat_f64(e, b.hi) != std::cmp::Ordering::Greater);
        }
        let vol = TabFactor::new(rat_i64(3, 7));
        let ei = exact.integrate(&vol);
        let bi = boxed.integrate(&vol);
        assert!(crate::rat::cmp_rat_f64(&ei, bi.lo) != std::cmp::Ordering::Less);
        assert!(crate::rat::cmp_rat_f64(&ei, bi.hi) != std::cmp::Ordering::Greater);
    }
}

//! Block-structured tetrahedral meshes with exact rational coordinates.
//!
//! Domains are axis-aligned unions of equal cubes described by an occupancy
//! mask. Each cube splits into 5 tetrahedra; the alternating-diagonal
//! pattern is encoded globally (a vertex is a "diagonal" vertex iff its
//! grid-coordinate parity is even), which makes adjacent cubes conform
//! automatically. Scott-Vogelius meshes come from the barycentric 4-way
//! refinement of each tetrahedron; guaranteed-eigenvalue meshes from the
//! uniform 8-way refinement with the fixed octahedron diagonal.
//!
//! All volumes, facet matchings and mesh sizes are decided in exact
//! rational arithmetic; nothing here depends on tolerances.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::rat::{rat_i64, rat_to_interval, rat_to_string, rat_parse, rdet3, rpoint_sub, Rat, RPoint};
use num_traits::Zero;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Cuboid-with-holes domain: a grid of cubes with an occupancy mask.
#[derive(Debug, Clone)]
pub struct BlockDomain {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Edge length of one cube.
    pub h_cube: Rat,
    /// Row-major mask, index `x + nx*(y + ny*z)`.
    pub occupancy: Vec<bool>,
}

impl BlockDomain {
    pub fn full(nx: usize, ny: usize, nz: usize, h_cube: Rat) -> Self {
        BlockDomain { nx, ny, nz, h_cube, occupancy: vec![true; nx * ny * nz] }
    }

    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, present: bool) {
        let i = self.idx(x, y, z);
        self.occupancy[i] = present;
    }

    pub fn present(&self, x: usize, y: usize, z: usize) -> bool {
        self.occupancy[self.idx(x, y, z)]
    }

    pub fn cube_count(&self) -> usize {
        self.occupancy.iter().filter(|&&p| p).count()
    }

    /// ((0,1)^2 minus [1/4,1/2]^2) x (0,1/2) at cube size 1/4:
    /// a 4 x 4 x 2 grid with the (1,1,*) column removed, 30 cubes.
    pub fn paper_domain() -> Self {
        let mut d = BlockDomain::full(4, 4, 2, rat_i64(1, 4));
        d.set(1, 1, 0, false);
        d.set(1, 1, 1, false);
        d
    }

    /// Small single-cube-hole variant for desk-scale runs: a 3 x 3 x 1 grid
    /// with the center cube removed, 8 cubes.
    pub fn desk_domain() -> Self {
        let mut d = BlockDomain::full(3, 3, 1, rat_i64(1, 4));
        d.set(1, 1, 0, false);
        d
    }

    pub fn unit_cube(n: usize) -> Self {
        BlockDomain::full(n, n, n, rat_i64(1, n as i64))
    }

    /// Halve every cube edge: each present cube becomes 8 present children.
    /// Rebuilding the 5-way split on the refined grid keeps the two element
    /// shape classes and exactly halves every tet diameter.
    pub fn refine(&self) -> BlockDomain {
        let mut d = BlockDomain {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            nz: 2 * self.nz,
            h_cube: &self.h_cube * rat_i64(1, 2),
            occupancy: vec![false; 8 * self.nx * self.ny * self.nz],
        };
        for z in 0..self.nz {
            for y in 0..self.ny {
                for x in 0..self.nx {
                    if self.present(x, y, z) {
                        for (dx, dy, dz) in
                            child_offsets()
                        {
                            d.set(2 * x + dx, 2 * y + dy, 2 * z + dz, true);
                        }
                    }
                }
            }
        }
        d
    }

    pub fn refined(&self, levels: usize) -> BlockDomain {
        let mut d = self.clone();
        for _ in 0..levels {
            d = d.refine();
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        if self.cube_count() == 0 {
            return Err(Error::Mesh("empty domain: no cube present".into()));
        }
        // connectivity over face adjacency
        let start = self.occupancy.iter().position(|&p| p).unwrap();
        let mut seen = vec![false; self.occupancy.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let (nx, ny, nz) = (self.nx as isize, self.ny as isize, self.nz as isize);
        while let Some(i) = stack.pop() {
            let x = (i % self.nx) as isize;
            let y = ((i / self.nx) % self.ny) as isize;
            let z = (i / (self.nx * self.ny)) as isize;
            for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
            {
                let (a, b, c) = (x + dx, y + dy, z + dz);
                if a >= 0 && a < nx && b >= 0 && b < ny && c >= 0 && c < nz {
                    let j = self.idx(a as usize, b as usize, c as usize);
                    if self.occupancy[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if seen.iter().zip(&self.occupancy).any(|(&s, &p)| p && !s) {
            return Err(Error::Mesh("present region is not connected".into()));
        }
        Ok(())
    }
}

/// Tetrahedral mesh with exact rational vertices.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub vertices: Vec<RPoint>,
    /// Vertex index quadruples, positively oriented.
    pub tets: Vec<[usize; 4]>,
    /// Sub-cube edge length when built from a block domain.
    pub h_cube: Option<Rat>,
}

/// Mesh sizes: `diameter_sq` is the exact square of the largest tet
/// diameter (the longest edge of a simplex realizes its diameter).
#[derive(Debug, Clone)]
pub struct MeshSize {
    pub diameter_sq: Rat,
    pub h_cube: Option<Rat>,
}

impl MeshSize {
    /// Interval enclosure of the largest tet diameter.
    pub fn diameter(&self) -> Interval {
        rat_to_interval(&self.diameter_sq)
            .sqrt()
            .expect("squared diameter is nonnegative")
    }

    pub fn h_cube_interval(&self) -> Option<Interval> {
        self.h_cube.as_ref().map(rat_to_interval)
    }
}

const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

fn child_offsets() -> impl Iterator<Item = (usize, usize, usize)> {
    (0..2usize).flat_map(|dx| (0..2usize).flat_map(move |dy| (0..2usize).map(move |dz| (dx, dy, dz))))
}

impl TetMesh {
    pub fn tet_volume(&self, t: usize) -> Rat {
        let [a, b, c, d] = self.tets[t];
        let e1 = rpoint_sub(&self.vertices[b], &self.vertices[a]);
        let e2 = rpoint_sub(&self.vertices[c], &self.vertices[a]);
        let e3 = rpoint_sub(&self.vertices[d], &self.vertices[a]);
        rdet3(&e1, &e2, &e3) / rat_i64(6, 1)
    }

    pub fn total_volume(&self) -> Rat {
        let mut v = Rat::zero();
        for t in 0..self.tets.len() {
            v += self.tet_volume(t);
        }
        v
    }

    pub fn centroid(&self, t: usize) -> RPoint {
        let [a, b, c, d] = self.tets[t];
        let q = rat_i64(1, 4);
        let mut p = [Rat::zero(), Rat::zero(), Rat::zero()];
        for &v in &[a, b, c, d] {
            for k in 0..3 {
                p[k] += &self.vertices[v][k] * &q;
            }
        }
        p
    }

    pub fn vertex_f64(&self, v: usize) -> [f64; 3] {
        let p = &self.vertices[v];
        [
            rat_to_interval(&p[0]).mid(),
            rat_to_interval(&p[1]).mid(),
            rat_to_interval(&p[2]).mid(),
        ]
    }

    pub fn centroid_f64(&self, t: usize) -> [f64; 3] {
        let [a, b, c, d] = self.tets[t];
        let mut p = [0.0; 3];
        for &v in &[a, b, c, d] {
            let q = self.vertex_f64(v);
            for k in 0..3 {
                p[k] += 0.25 * q[k];
            }
        }
        p
    }

    /// Largest squared edge length over all tets plus the stored cube edge.
    pub fn mesh_size(&self) -> MeshSize {
        let mut best = Rat::zero();
        for t in &self.tets {
            for e in &TET_EDGES {
                let d = rpoint_sub(&self.vertices[t[e[1]]], &self.vertices[t[e[0]]]);
                let sq = &d[0] * &d[0] + &d[1] * &d[1] + &d[2] * &d[2];
                if sq > best {
                    best = sq;
                }
            }
        }
        MeshSize { diameter_sq: best, h_cube: self.h_cube.clone() }
    }

    /// Validate orientation and facet conformity.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.tets.len() {
            if self.tet_volume(t) <= Rat::zero() {
                return Err(Error::Mesh(format!("tet {t} has nonpositive volume")));
            }
        }
        let mut counts: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for t in &self.tets {
            for f in facet_triples(t) {
                *counts.entry(f).or_insert(0) += 1;
            }
        }
        if let Some((f, c)) = counts.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!("facet {f:?} shared by {c} tets")));
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "tetmesh {} {}", self.vertices.len(), self.tets.len())?;
        match &self.h_cube {
            Some(h) => writeln!(w, "hcube {}", rat_to_string(h))?,
            None => writeln!(w, "hcube none")?,
        }
        for v in &self.vertices {
            writeln!(
                w,
                "v {} {} {}",
                rat_to_string(&v[0]),
                rat_to_string(&v[1]),
                rat_to_string(&v[2])
            )?;
        }
        for t in &self.tets {
            writeln!(w, "t {} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh file".into()))??;
        let mut it = header.split_whitespace();
        if it.next() != Some("tetmesh") {
            return Err(Error::Parse("missing tetmesh header".into()));
        }
        let nv: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad vertex count".into()))?;
        let nt: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad tet count".into()))?;
        let hline = lines
            .next()
            .ok_or_else(|| Error::Parse("missing hcube line".into()))??;
        let h_cube = match hline.split_whitespace().nth(1) {
            Some("none") | None => None,
            Some(tok) => Some(rat_parse(tok)?),
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut tets = Vec::with_capacity(nt);
        for line in lines {
            let line = line?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.first() {
                Some(&"v") => {
                    if tok.len() != 4 {
                        return Err(Error::Parse(format!("bad vertex line {line:?}")));
                    }
                    vertices.push([rat_parse(tok[1])?, rat_parse(tok[2])?, rat_parse(tok[3])?]);
                }
                Some(&"t") => {
                    let idx: Vec<usize> = tok[1..]
                        .iter()
                        .map(|t| t.parse().map_err(|_| Error::Parse("bad tet index".into())))
                        .collect::<Result<_>>()?;
                    if idx.len() != 4 {
                        return Err(Error::Parse(format!("bad tet line {line:?}")));
                    }
                    tets.push([idx[0], idx[1], idx[2], idx[3]]);
                }
                _ => {}
            }
        }
        if vertices.len() != nv || tets.len() != nt {
            return Err(Error::Parse("mesh counts do not match header".into()));
        }
        let mesh = TetMesh { vertices, tets, h_cube };
        mesh.validate()?;
        Ok(mesh)
    }
}

fn facet_triples(t: &[usize; 4]) -> [[usize; 3]; 4] {
    let mut out = [[0usize; 3]; 4];
    for (i, f) in out.iter_mut().enumerate() {
        let mut tri: Vec<usize> = (0..4).filter(|&j| j != i).map(|j| t[j]).collect();
        tri.sort_unstable();
        f.copy_from_slice(&tri);
    }
    out
}

fn orient_positive(mesh: &mut TetMesh) {
    for t in 0..mesh.tets.len() {
        if mesh.tet_volume(t) < Rat::zero() {
            mesh.tets[t].swap(2, 3);
        }
    }
}

/// Split every present cube into 5 tetrahedra (4 corner tets around the
/// inscribed diagonal tetrahedron). Diagonal vertices are the even-parity
/// grid vertices, which makes shared facets conform across cubes.
pub fn build_cube_mesh(domain: &BlockDomain) -> Result<TetMesh> {
    domain.validate()?;
    let mut vid: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    let mut vertices: Vec<RPoint> = Vec::new();
    let h = &domain.h_cube;
    let mut get = |g: (usize, usize, usize), vertices: &mut Vec<RPoint>| -> usize {
        *vid.entry(g).or_insert_with(|| {
            let p = [
                h * rat_i64(g.0 as i64, 1),
                h * rat_i64(g.1 as i64, 1),
                h * rat_i64(g.2 as i64, 1),
            ];
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut tets = Vec::new();
    for z in 0..domain.nz {
        for y in 0..domain.ny {
            for x in 0..domain.nx {
                if !domain.present(x, y, z) {
                    continue;
                }
                let corner = |dx: usize, dy: usize, dz: usize| (x + dx, y + dy, z + dz);
                let even = |g: (usize, usize, usize)| (g.0 + g.1 + g.2) % 2 == 0;
                let locals: Vec<(usize, usize, usize)> = (0..8)
                    .map(|m| corner(m & 1, (m >> 1) & 1, (m >> 2) & 1))
                    .collect();
                let diag: Vec<usize> = locals
                    .iter()
                    .filter(|g| even(**g))
                    .map(|g| get(*g, &mut vertices))
                    .collect();
                debug_assert_eq!(diag.len(), 4);
                tets.push([diag[0], diag[1], diag[2], diag[3]]);
                for g in locals.iter().filter(|g| !even(**g)) {
                    let v = get(*g, &mut vertices);
                    let mut nbrs = Vec::with_capacity(3);
                    for (dx, dy, dz) in [(1i64, 0i64, 0i64), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
                        let n = (g.0 as i64 + dx, g.1 as i64 + dy, g.2 as i64 + dz);
                        // neighbor inside this cube
                        let inside = n.0 >= x as i64
                            && n.0 <= (x + 1) as i64
                            && n.1 >= y as i64
                            && n.1 <= (y + 1) as i64
                            && n.2 >= z as i64
                            && n.2 <= (z + 1) as i64;
                        if inside {
                            nbrs.push(get((n.0 as usize, n.1 as usize, n.2 as usize), &mut vertices));
                        }
                    }
                    debug_assert_eq!(nbrs.len(), 3);
                    tets.push([v, nbrs[0], nbrs[1], nbrs[2]]);
                }
            }
        }
    }
    let mut mesh = TetMesh { vertices, tets, h_cube: Some(domain.h_cube.clone()) };
    orient_positive(&mut mesh);
    mesh.validate()
        .map_err(|e| Error::Mesh(format!("non-conforming cube split: {e}")))?;
    // every interior facet must be shared by exactly two tets
    let topo = Topology::build(&mesh);
    for (f, ts) in topo.facets.iter().zip(&topo.facet_tets) {
        if ts[0].is_none() {
            return Err(Error::Mesh(format!("orphan facet {f:?}")));
        }
    }
    Ok(mesh)
}

/// Barycentric refinement: each tet is split into 4 by its centroid.
pub fn zhang_refine(mesh: &TetMesh) -> TetMesh {
    let mut vertices = mesh.vertices.clone();
    let mut tets = Vec::with_capacity(4 * mesh.tets.len());
    for t in 0..mesh.tets.len() {
        let c = mesh.centroid(t);
        vertices.push(c);
        let ci = vertices.len() - 1;
        let [a, b, cc, d] = mesh.tets[t];
        tets.push([ci, b, cc, d]);
        tets.push([a, ci, cc, d]);
        tets.push([a, b, ci, d]);
        tets.push([a, b, cc, ci]);
    }
    let mut out = TetMesh { vertices, tets, h_cube: mesh.h_cube.clone() };
    orient_positive(&mut out);
    out
}

/// Uniform 8-way refinement (corner tets plus the octahedron split along
/// the fixed m02-m13 diagonal). Conforming under uniform application.
pub fn red_refine(mesh: &TetMesh) -> TetMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut tets = Vec::with_capacity(8 * mesh.tets.len());
    let half = rat_i64(1, 2);
    for t in &mesh.tets {
        let mut m = [[0usize; 4]; 4];
        for e in &TET_EDGES {
            let (a, b) = (t[e[0]].min(t[e[1]]), t[e[0]].max(t[e[1]]));
            let id = *midpoint.entry((a, b)).or_insert_with(|| {
                let p = [
                    (&vertices[a][0] + &vertices[b][0]) * &half,
                    (&vertices[a][1] + &vertices[b][1]) * &half,
                    (&vertices[a][2] + &vertices[b][2]) * &half,
                ];
                vertices.push(p);
                vertices.len() - 1
            });
            m[e[0]][e[1]] = id;
            m[e[1]][e[0]] = id;
        }
        let (v0, v1, v2, v3) = (t[0], t[1], t[2], t[3]);
        let (m01, m02, m03) = (m[0][1], m[0][2], m[0][3]);
        let (m12, m13, m23) = (m[1][2], m[1][3], m[2][3]);
        tets.push([v0, m01, m02, m03]);
        tets.push([m01, v1, m12, m13]);
        tets.push([m02, m12, v2, m23]);
        tets.push([m03, m13, m23, v3]);
        tets.push([m01, m02, m03, m13]);
        tets.push([m01, m02, m12, m13]);
        tets.push([m02, m03, m13, m23]);
        tets.push([m02, m12, m13, m23]);
    }
    let mut out = TetMesh { vertices, tets, h_cube: mesh.h_cube.clone() };
    orient_positive(&mut out);
    out
}

/// Entity tables with deterministic (lexicographic) ids.
#[derive(Debug, Clone)]
pub struct Topology {
    pub edges: Vec<[usize; 2]>,
    pub facets: Vec<[usize; 3]>,
    /// Local edges follow `TET_EDGES` order.
    pub tet_edges: Vec<[usize; 6]>,
    /// `tet_facets[t][i]` is the facet opposite local vertex i.
    pub tet_facets: Vec<[usize; 4]>,
    pub facet_tets: Vec<[Option<usize>; 2]>,
    pub boundary_facet: Vec<bool>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
}

impl Topology {
    pub fn build(mesh: &TetMesh) -> Self {
        let mut edge_id: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut facet_id: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for t in &mesh.tets {
            for e in &TET_EDGES {
                let mut pair = [t[e[0]], t[e[1]]];
                pair.sort_unstable();
                edge_id.entry(pair).or_insert(0);
            }
            for f in facet_triples(t) {
                facet_id.entry(f).or_insert(0);
            }
        }
        let edges: Vec<[usize; 2]> = edge_id.keys().cloned().collect();
        for (i, e) in edges.iter().enumerate() {
            *edge_id.get_mut(e).unwrap() = i;
        }
        let facets: Vec<[usize; 3]> = facet_id.keys().cloned().collect();
        for (i, f) in facets.iter().enumerate() {
            *facet_id.get_mut(f).unwrap() = i;
        }
        let mut tet_edges = Vec::with_capacity(mesh.tets.len());
        let mut tet_facets = Vec::with_capacity(mesh.tets.len());
        let mut facet_tets: Vec<[Option<usize>; 2]> = vec![[None, None]; facets.len()];
        for (ti, t) in mesh.tets.iter().enumerate() {
            let mut te = [0usize; 6];
            for (k, e) in TET_EDGES.iter().enumerate() {
                let mut pair = [t[e[0]], t[e[1]]];
                pair.sort_unstable();
                te[k] = edge_id[&pair];
            }
            tet_edges.push(te);
            let mut tf = [0usize; 4];
            for (k, f) in facet_triples(t).iter().enumerate() {
                let fi = facet_id[f];
                tf[k] = fi;
                if facet_tets[fi][0].is_none() {
                    facet_tets[fi][0] = Some(ti);
                } else {
                    facet_tets[fi][1] = Some(ti);
                }
            }
            tet_facets.push(tf);
        }
        let boundary_facet: Vec<bool> = facet_tets.iter().map(|p| p[1].is_none()).collect();
        let mut boundary_vertex = vec![false; mesh.vertices.len()];
        let mut boundary_edge = vec![false; edges.len()];
        for (fi, f) in facets.iter().enumerate() {
            if boundary_facet[fi] {
                for &v in f {
                    boundary_vertex[v] = true;
                }
                for pair in [[f[0], f[1]], [f[0], f[2]], [f[1], f[2]]] {
                    boundary_edge[edge_id[&pair]] = true;
                }
            }
        }
        Topology {
            edges,
            facets,
            tet_edges,
            tet_facets,
            facet_tets,
            boundary_facet,
            boundary_vertex,
            boundary_edge,
        }
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.boundary_facet.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cube_five_tets() {
        let d = BlockDomain::full(1, 1, 1, rat_i64(1, 1));
        let m = build_cube_mesh(&d).unwrap();
        assert_eq!(m.tets.len(), 5);
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.total_volume(), rat_i64(1, 1));
        let sz = m.mesh_size();
        assert_eq!(sz.diameter_sq, rat_i64(2, 1)); // face diagonal of unit cube
        assert_eq!(sz.h_cube.unwrap(), rat_i64(1, 1));
    }

    #[test]
    fn bar_conforms() {
        let d = BlockDomain::full(2, 1, 1, rat_i64(1, 2));
        let m = build_cube_mesh(&d).unwrap();
        assert_eq!(m.tets.len(), 10);
        let topo = Topology::build(&m);
        // interior facets shared by exactly two tets, boundary by one
        let interior = topo.facet_tets.iter().filter(|p| p[1].is_some()).count();
        assert!(interior > 0);
        assert_eq!(m.total_volume(), rat_i64(1, 4));
    }

    #[test]
    fn paper_domain_counts() {
        let d = BlockDomain::paper_domain();
        assert_eq!(d.cube_count(), 30);
        let m = build_cube_mesh(&d).unwrap();
        assert_eq!(m.tets.len(), 150);
        let sv = zhang_refine(&m);
        assert_eq!(sv.tets.len(), 600);
        assert_eq!(sv.total_volume(), m.total_volume());
        assert_eq!(m.total_volume(), rat_i64(15, 32)); // (1 - 1/16) * 1/2
        assert_eq!(m.mesh_size().h_cube.unwrap(), rat_i64(1, 4));
        sv.validate().unwrap();
    }

    #[test]
    fn zhang_children_partition_parent() {
        let d = BlockDomain::full(1, 1, 1, rat_i64(1, 1));
        let m = build_cube_mesh(&d).unwrap();
        let r = zhang_refine(&m);
        assert_eq!(r.tets.len(), 20);
        assert_eq!(r.vertices.len(), m.vertices.len() + m.tets.len());
        for t in 0..m.tets.len() {
            let parent = m.tet_volume(t);
            let mut sum = Rat::zero();
            for c in 0..4 {
                let child = 4 * t + c;
                let cv = r.tet_volume(child);
                assert!(cv > Rat::zero());
                sum += cv;
            }
            assert_eq!(sum, parent);
        }
    }

    #[test]
    fn red_refine_preserves_volume_and_conforms() {
        let d = BlockDomain::full(1, 1, 1, rat_i64(1, 1));
        let m = build_cube_mesh(&d).unwrap();
        let r = red_refine(&m);
        assert_eq!(r.tets.len(), 40);
        assert_eq!(r.total_volume(), m.total_volume());
        r.validate().unwrap();
        let rr = red_refine(&r);
        assert_eq!(rr.tets.len(), 320);
        rr.validate().unwrap();
        // diameters shrink (octahedron children contract slower than 1/2)
        assert!(rr.mesh_size().diameter_sq < m.mesh_size().diameter_sq);
    }

    #[test]
    fn block_refine_halves_diameters() {
        let d = BlockDomain::paper_domain();
        let r = d.refine();
        assert_eq!(r.cube_count(), 8 * d.cube_count());
        let m0 = build_cube_mesh(&d).unwrap();
        let m2 = build_cube_mesh(&d.refined(2)).unwrap();
        assert_eq!(m2.total_volume(), m0.total_volume());
        assert_eq!(m2.mesh_size().diameter_sq * rat_i64(16, 1), m0.mesh_size().diameter_sq);
        assert_eq!(m2.tets.len(), 64 * m0.tets.len());
    }

    #[test]
    fn scaling_homogeneity() {
        let d1 = BlockDomain::full(2, 1, 1, rat_i64(1, 1));
        let d2 = BlockDomain::full(2, 1, 1, rat_i64(3, 1));
        let m1 = build_cube_mesh(&d1).unwrap();
        let m2 = build_cube_mesh(&d2).unwrap();
        let s1 = m1.mesh_size();
        let s2 = m2.mesh_size();
        assert_eq!(s2.diameter_sq, s1.diameter_sq * rat_i64(9, 1));
        assert_eq!(s2.h_cube.unwrap(), s1.h_cube.unwrap() * rat_i64(3, 1));
    }

    #[test]
    fn disconnected_rejected() {
        let mut d = BlockDomain::full(3, 1, 1, rat_i64(1, 1));
        d.set(1, 0, 0, false);
        assert!(build_cube_mesh(&d).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let d = BlockDomain::desk_domain();
        let m = build_cube_mesh(&d).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = TetMesh::read_text(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.tets, m.tets);
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.h_cube, m.h_cube);
    }
}

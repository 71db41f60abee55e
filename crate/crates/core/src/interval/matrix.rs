//! Interval vectors and matrices (dense and sparse) plus the documented
//! triplet text format: one `row col lo hi` line per stored entry.

use crate::error::{Error, Result};
use crate::interval::Interval;
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

pub type IvVec = Vec<Interval>;

/// Certified enclosure of one eigenvalue of a symmetric pencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigEnclosure {
    /// Eigenvalue ordinal, 0-based, counted from the smallest.
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Dense interval matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IvMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<Interval>,
}

impl IvMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        IvMat { nrows, ncols, data: vec![Interval::ZERO; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::ONE;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        IvMat { nrows, ncols, data }
    }

    pub fn from_point(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| Interval::point(m[(i, j)]))
    }

    pub fn mid(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)].mid())
    }

    pub fn rad(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)].rad())
    }

    /// Rebuild from midpoint/radius parts; `rad` entries must be >= 0.
    pub fn from_mid_rad(mid: &DMatrix<f64>, rad: &DMatrix<f64>) -> Self {
        Self::from_fn(mid.nrows(), mid.ncols(), |i, j| {
            let m = mid[(i, j)];
            let r = rad[(i, j)];
            debug_assert!(r >= 0.0);
            Interval::new((m - r).next_down(), (m + r).next_up())
        })
    }

    pub fn transpose(&self) -> IvMat {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &IvMat) -> IvMat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect();
        IvMat { nrows: self.nrows, ncols: self.ncols, data }
    }

    pub fn sub(&self, other: &IvMat) -> IvMat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect();
        IvMat { nrows: self.nrows, ncols: self.ncols, data }
    }

    pub fn scale(&self, s: Interval) -> IvMat {
        let data = self.data.iter().map(|a| *a * s).collect();
        IvMat { nrows: self.nrows, ncols: self.ncols, data }
    }

    /// Fast enclosure of the product, midpoint-radius kernel.
    pub fn mul(&self, other: &IvMat) -> IvMat {
        crate::linalg::midrad::iv_gemm(self, other)
    }

    pub fn matvec(&self, x: &[Interval]) -> IvVec {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .map(|i| crate::interval::iv_dot(&self.data[i * self.ncols..(i + 1) * self.ncols], x))
            .collect()
    }

    /// Symmetric part enclosure: contains (M + M^T)/2 for every M in the box.
    /// Used when an exactly-symmetric quantity was computed asymmetrically.
    pub fn symmetrize(&self) -> IvMat {
        assert_eq!(self.nrows, self.ncols);
        Self::from_fn(self.nrows, self.ncols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * Interval::point(0.5)
        })
    }

    /// Entrywise hull with the transpose: contains M whenever M = M^T in the box.
    pub fn hull_sym(&self) -> IvMat {
        assert_eq!(self.nrows, self.ncols);
        Self::from_fn(self.nrows, self.ncols, |i, j| {
            self[(i, j)].intersect(&self[(j, i)]).unwrap_or_else(|| self[(i, j)].hull(&self[(j, i)]))
        })
    }

    pub fn max_rad(&self) -> f64 {
        self.data.iter().map(|v| v.rad()).fold(0.0, f64::max)
    }

    /// Upper bound on the infinity norm over all point matrices in the box.
    pub fn norm_inf_upper(&self) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let mut s = Interval::ZERO;
                for j in 0..self.ncols {
                    s += Interval::point(self[(i, j)].mag());
                }
                s.hi
            })
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for IvMat {
    type Output = Interval;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IvMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.data[i * self.ncols + j]
    }
}

/// Sparse interval matrix in compressed sparse column form.
#[derive(Clone, Debug)]
pub struct IvSparse {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub vals: Vec<Interval>,
    /// Set when the matrix is symmetric by construction; entry (i, j) is then
    /// stored for both triangles and `entry(i,j) == entry(j,i)` exactly.
    pub symmetric: bool,
}

impl IvSparse {
    /// Build from (row, col, value) triplets; duplicate positions are summed
    /// with interval addition. Triplet order does not affect the result.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Interval)>,
    ) -> Self {
        let mut per_col: Vec<Vec<(usize, Interval)>> = vec![Vec::new(); ncols];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            per_col[c].push((r, v));
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for col in per_col.iter_mut() {
            col.sort_by_key(|&(r, _)| r);
            let mut i = 0;
            while i < col.len() {
                let r = col[i].0;
                let mut v = col[i].1;
                let mut j = i + 1;
                while j < col.len() && col[j].0 == r {
                    v += col[j].1;
                    j += 1;
                }
                row_idx.push(r);
                vals.push(v);
                i = j;
            }
            col_ptr.push(row_idx.len());
        }
        IvSparse { nrows, ncols, col_ptr, row_idx, vals, symmetric: false }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => self.vals[lo + k],
            Err(_) => Interval::ZERO,
        }
    }

    pub fn to_dense(&self) -> IvMat {
        let mut m = IvMat::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                m[(self.row_idx[k], j)] = self.vals[k];
            }
        }
        m
    }

    pub fn transpose(&self) -> IvSparse {
        let mut t = IvSparse::from_triplets(
            self.ncols,
            self.nrows,
            (0..self.ncols).flat_map(|j| {
                (self.col_ptr[j]..self.col_ptr[j + 1])
                    .map(move |k| (j, self.row_idx[k], self.vals[k]))
            }),
        );
        t.symmetric = self.symmetric;
        t
    }

    pub fn matvec(&self, x: &[Interval]) -> IvVec {
        assert_eq!(self.ncols, x.len());
        let mut y = vec![Interval::ZERO; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.vals[k] * xj;
            }
        }
        y
    }

    /// y = A^T x.
    pub fn matvec_t(&self, x: &[Interval]) -> IvVec {
        assert_eq!(self.nrows, x.len());
        let mut y = vec![Interval::ZERO; self.ncols];
        for j in 0..self.ncols {
            let mut s = Interval::ZERO;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.vals[k] * x[self.row_idx[k]];
            }
            y[j] = s;
        }
        y
    }

    /// Sparse * dense product.
    pub fn mul_dense(&self, x: &IvMat) -> IvMat {
        assert_eq!(self.ncols, x.nrows);
        let mut out = IvMat::zeros(self.nrows, x.ncols);
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let a = self.vals[k];
                let r = self.row_idx[k];
                for c in 0..x.ncols {
                    out[(r, c)] += a * x[(j, c)];
                }
            }
        }
        out
    }

    /// Sparse * sparse product (classic CSC accumulation).
    pub fn mul_sparse(&self, other: &IvSparse) -> IvSparse {
        assert_eq!(self.ncols, other.nrows);
        let mut col_ptr = vec![0usize];
        let mut row_idx: Vec<usize> = Vec::new();
        let mut vals: Vec<Interval> = Vec::new();
        let mut acc: Vec<Interval> = vec![Interval::ZERO; self.nrows];
        let mut mark: Vec<u64> = vec![u64::MAX; self.nrows];
        let mut touched: Vec<usize> = Vec::new();
        for j in 0..other.ncols {
            touched.clear();
            for k in other.col_ptr[j]..other.col_ptr[j + 1] {
                let a_col = other.row_idx[k];
                let bv = other.vals[k];
                for p in self.col_ptr[a_col]..self.col_ptr[a_col + 1] {
                    let r = self.row_idx[p];
                    if mark[r] != j as u64 {
                        mark[r] = j as u64;
                        acc[r] = Interval::ZERO;
                        touched.push(r);
                    }
                    acc[r] += self.vals[p] * bv;
                }
            }
            touched.sort_unstable();
            for &r in &touched {
                row_idx.push(r);
                vals.push(acc[r]);
            }
            col_ptr.push(row_idx.len());
        }
        IvSparse { nrows: self.nrows, ncols: other.ncols, col_ptr, row_idx, vals, symmetric: false }
    }

    pub fn mid_sparse(&self) -> crate::linalg::sparse::Csc<f64> {
        crate::linalg::sparse::Csc {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            vals: self.vals.iter().map(|v| v.mid()).collect(),
        }
    }

    /// Write the documented sparse triplet text format:
    /// header `ivsparse <nrows> <ncols> <nnz>` then one `row col lo hi` per entry.
    pub fn write_triplets<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "ivsparse {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let v = self.vals[k];
                writeln!(w, "{} {} {} {}", self.row_idx[k], j, v.lo, v.hi)?;
            }
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        if it.next() != Some("ivsparse") {
            return Err(Error::Parse("missing ivsparse header".into()));
        }
        let dims: Vec<usize> = it
            .map(|t| t.parse().map_err(|_| Error::Parse("bad header".into())))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse("bad ivsparse header".into()));
        }
        let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
        let mut triplets = Vec::with_capacity(nnz);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 4 {
                return Err(Error::Parse(format!("bad triplet line {line:?}")));
            }
            let row: usize = tok[0].parse().map_err(|_| Error::Parse("bad row".into()))?;
            let col: usize = tok[1].parse().map_err(|_| Error::Parse("bad col".into()))?;
            let lo: f64 = tok[2].parse().map_err(|_| Error::Parse("bad lo".into()))?;
            let hi: f64 = tok[3].parse().map_err(|_| Error::Parse("bad hi".into()))?;
            triplets.push((row, col, Interval::new(lo, hi)));
        }
        if triplets.len() != nnz {
            return Err(Error::Parse(format!(
                "expected {} entries, found {}",
                nnz,
                triplets.len()
            )));
        }
        Ok(Self::from_triplets(nrows, ncols, triplets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_roundtrip() {
        let m = IvSparse::from_triplets(
            3,
            2,
            vec![
                (0, 0, Interval::new(1.0, 1.5)),
                (2, 1, Interval::point(-0.25)),
                (0, 0, Interval::point(0.5)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert!(m.get(0, 0).contains(1.5) && m.get(0, 0).contains(2.0));
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let back = IvSparse::read_triplets(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.nnz(), m.nnz());
        assert_eq!(back.get(2, 1), m.get(2, 1));
        assert_eq!(back.get(0, 0), m.get(0, 0));
    }

    #[test]
    fn dense_ops() {
        let a = IvMat::from_fn(2, 2, |i, j| Interval::point((i * 2 + j) as f64));
        let x = vec![Interval::point(1.0), Interval::point(-1.0)];
        let y = a.matvec(&x);
        assert!(y[0].contains(-1.0) && y[1].contains(-1.0));
        let t = a.transpose();
        assert_eq!(t[(0, 1)], a[(1, 0)]);
    }
}

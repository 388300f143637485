//! Sparse row storage, banded LU with partial pivoting, and the bordered
//! solver for star-graph systems: one banded block per edge plus a small
//! dense block of vertex rows coupling the edges.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-wise sparse matrix; entries within a row are kept in insertion order
/// and duplicates are summed on use.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(col < self.n_cols);
        self.rows[row].push((col, value));
    }

    pub fn set_row(&mut self, row: usize, entries: Vec<(usize, f64)>) {
        self.rows[row] = entries;
    }

    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.rows[row]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Coordinate triples `(row, col, value)`, row-major.
    /// Coordinate triples sorted by (row, col), repeated entries summed.
    pub fn coo(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let mut entries = row.clone();
            entries.sort_by_key(|&(c, _)| c);
            for (c, v) in entries {
                match out.last_mut() {
                    Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                    _ => out.push((r, c, v)),
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_rows(), self.n_cols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[(r, c)] += v;
            }
        }
        a
    }
}

/// LU factorization of a square band matrix with `kl` sub- and `ku`
/// super-diagonals, row pivoting within the band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` holds columns `i - kl ..= i + kl + ku` (the extra `kl`
    /// absorbs fill-in from pivoting).
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn width(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    /// Band storage for an `n x n` matrix, zero-filled.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedLu {
            n,
            kl,
            ku,
            ab: vec![0.0; n * Self::width(kl, ku)],
            pivots: Vec::new(),
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * Self::width(self.kl, self.ku) + (j + self.kl - i)
    }

    /// Adds `value` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.ab[s] += value;
    }

    pub fn factor(mut self) -> Result<Self> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.ab.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        self.pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.ab[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::LinearSolveFailure(format!(
                    "zero pivot in banded block at column {k}"
                )));
            }
            self.pivots.push(p);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.slot(k, k)];
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.ab[sik] / pivot;
                self.ab[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let skj = self.ab[self.slot(k, j)];
                        let sij = self.slot(i, j);
                        self.ab[sij] -= l * skj;
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.ab[self.slot(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.ab[self.slot(k, j)] * b[j];
            }
            b[k] = s / self.ab[self.slot(k, k)];
        }
    }
}

/// Unknowns grouped per edge as `[vertex value, interior values...]`;
/// every non-vertex row touches only its own edge, vertex rows may touch
/// anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BorderedLayout {
    pub n_edges: usize,
    /// Unknowns per edge, including the vertex value.
    pub block: usize,
    pub kl: usize,
    pub ku: usize,
}

impl BorderedLayout {
    pub fn global(&self, edge: usize, local: usize) -> usize {
        edge * self.block + local
    }

    fn split(&self, global: usize) -> (usize, usize) {
        (global / self.block, global % self.block)
    }
}

/// Factorized bordered system: `A_j y_j + b_j u_j0 = r_j` per edge and
/// the `N` vertex rows reduced to an `N x N` Schur complement.
#[derive(Debug, Clone)]
pub struct BorderedLu {
    layout: BorderedLayout,
    blocks: Vec<BandedLu>,
    /// `A_j^{-1} b_j`
    border_solves: Vec<Vec<f64>>,
    /// Vertex rows restricted to interior unknowns: `(edge, local, coef)`.
    vertex_interior: Vec<Vec<(usize, usize, f64)>>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BorderedLu {
    pub fn factor(matrix: &SparseMatrix, layout: BorderedLayout) -> Result<Self> {
        let n = layout.n_edges;
        let m = layout.block - 1;
        assert_eq!(matrix.n_rows(), n * layout.block);
        let mut blocks = Vec::with_capacity(n);
        let mut borders = Vec::with_capacity(n);
        for j in 0..n {
            let mut a = BandedLu::zeros(m, layout.kl, layout.ku);
            let mut b = vec![0.0; m];
            for i in 1..layout.block {
                for &(col, v) in matrix.row(layout.global(j, i)) {
                    let (e, c) = layout.split(col);
                    assert_eq!(e, j, "row on edge {j} couples to edge {e}");
                    if c == 0 {
                        b[i - 1] += v;
                    } else {
                        a.add(i - 1, c - 1, v);
                    }
                }
            }
            blocks.push(a.factor()?);
            borders.push(b);
        }
        let border_solves: Vec<Vec<f64>> = blocks
            .iter()
            .zip(borders)
            .map(|(lu, mut b)| {
                lu.solve_in_place(&mut b);
                b
            })
            .collect();

        let mut schur = DMatrix::<f64>::zeros(n, n);
        let mut vertex_interior = Vec::with_capacity(n);
        for r in 0..n {
            let mut interior = Vec::new();
            for &(col, v) in matrix.row(layout.global(r, 0)) {
                let (e, c) = layout.split(col);
                if c == 0 {
                    schur[(r, e)] += v;
                } else {
                    schur[(r, e)] -= v * border_solves[e][c - 1];
                    interior.push((e, c - 1, v));
                }
            }
            vertex_interior.push(interior);
        }
        let scale = schur.amax().max(1.0);
        let lu = schur.lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |a, d| a.min(d.abs()));
        if !(min_pivot > 1e-14 * scale) {
            return Err(Error::LinearSolveFailure(
                "vertex Schur complement is singular".into(),
            ));
        }
        Ok(BorderedLu {
            layout,
            blocks,
            border_solves,
            vertex_interior,
            schur: lu,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let layout = self.layout;
        let n = layout.n_edges;
        let mut z: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut r = rhs[layout.global(j, 1)..layout.global(j + 1, 0)].to_vec();
                self.blocks[j].solve_in_place(&mut r);
                r
            })
            .collect();
        let mut vrhs = DVector::from_iterator(n, (0..n).map(|r| rhs[layout.global(r, 0)]));
        for (r, row) in self.vertex_interior.iter().enumerate() {
            for &(e, c, v) in row {
                vrhs[r] -= v * z[e][c];
            }
        }
        let vertex = self
            .schur
            .solve(&vrhs)
            .ok_or_else(|| Error::LinearSolveFailure("vertex solve failed".into()))?;
        let mut x = vec![0.0; n * layout.block];
        for j in 0..n {
            x[layout.global(j, 0)] = vertex[j];
            for (c, zc) in z[j].iter_mut().enumerate() {
                *zc -= self.border_solves[j][c] * vertex[j];
                x[layout.global(j, c + 1)] = *zc;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure("non-finite solution".into()));
        }
        Ok(x)
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

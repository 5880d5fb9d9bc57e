use faer::sparse::{linalg::LuError, SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
            }
            t.push((i, j, v));
        }
        t.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric();
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t).expect("valid identity")
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Exact symmetry of both pattern and values, computed at assembly.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => self.values[self.row_ptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, &t).expect("transpose of a valid matrix")
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "mul_vec dimension mismatch");
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self^T x` without forming the transpose.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "mul_vec_transposed dimension mismatch");
        let mut out = vec![0.0; self.n_cols];
        for (i, j, v) in self.triplets() {
            out[j] += v * x[i];
        }
        out
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<Self> {
        if (self.n_rows, self.n_cols) != (other.n_rows, other.n_cols) {
            return Err(Error::dims("cannot combine matrices of different shapes"));
        }
        let t: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        Self::from_triplets(self.n_rows, self.n_cols, &t)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    fn check_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }
}

/// Sparse LU factors of a square matrix, reusable across right-hand sides.
pub struct SparseLu {
    a: SparseMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    a_norm: f64,
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::dims(format!("solve with a {}x{} matrix", n, a.n_cols())));
        }
        if n == 0 {
            return Err(Error::invalid("cannot factor an empty matrix"));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::invalid(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = csc.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular { pivot: index },
            LuError::Generic(e) => Error::invalid(format!("sparse LU failed: {e:?}")),
        })?;
        Ok(Self {
            a: a.clone(),
            lu,
            a_norm: a.norm_inf(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.n_rows()
    }

    fn raw_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        use faer::linalg::solvers::Solve;
        let n = self.dim();
        let r = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(r);
        let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        match x.iter().position(|v| !v.is_finite()) {
            Some(pivot) => Err(Error::Singular { pivot }),
            None => Ok(x),
        }
    }

    /// Solves `a x = b`, refining until `|a x - b|_inf <= 1e-12 (|a|_inf |x|_inf + |b|_inf)`
    /// or three refinement steps have been spent. A final residual above
    /// `1e-9` of that scale is reported as [`Error::Singular`] at the row
    /// with the largest residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::dims(format!("rhs length {} for a {n}x{n} matrix", b.len())));
        }
        let mut x = self.raw_solve(b)?;
        let b_norm = norm_inf(b);
        let mut r = residual(&self.a, &x, b);
        for _ in 0..3 {
            if norm_inf(&r) <= 1e-12 * (self.a_norm * norm_inf(&x) + b_norm) {
                return Ok(x);
            }
            let dx = self.raw_solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            r = residual(&self.a, &x, b);
        }
        if norm_inf(&r) <= 1e-9 * (self.a_norm * norm_inf(&x) + b_norm) {
            return Ok(x);
        }
        let (pivot, _) = r
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        Err(Error::Singular { pivot })
    }
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// One-shot direct solve of `a x = b`; see [`SparseLu::solve`] for the
/// accuracy contract. Breakdown is reported as [`Error::Singular`] with the
/// offending pivot (or, for a numerically singular factor, the first unknown
/// that came out non-finite).
pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows() == a.n_cols() && b.len() != a.n_rows() {
        return Err(Error::dims(format!("rhs length {} for a {}x{} matrix", b.len(), a.n_rows(), a.n_cols())));
    }
    if a.n_rows() == 0 && a.n_cols() == 0 {
        return Ok(Vec::new());
    }
    SparseLu::new(a)?.solve(b)
}

//! Compressed sparse row storage and a direct LU solve with residual
//! verification.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Par;

use crate::error::{Error, Result};

/// Relative residual bound `|Ax - b| / max(1, |b|)` every solve must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Compresses `(row, col, value)` triplets, summing duplicates in input
    /// order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(row, col, _)) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return Err(Error::IndexOutOfRange { row, col, nrows, ncols });
        }
        let mut counts = vec![0usize; nrows + 1];
        for t in triplets {
            counts[t.0 + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // stable bucket by row, then stable sort within each row by column
        let mut order = vec![0usize; triplets.len()];
        let mut next = counts.clone();
        for (k, t) in triplets.iter().enumerate() {
            order[next[t.0]] = k;
            next[t.0] += 1;
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for i in 0..nrows {
            let row = &mut order[counts[i]..counts[i + 1]];
            row.sort_by_key(|&k| triplets[k].1);
            for &k in row.iter() {
                let (_, c, v) = triplets[k];
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension");
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `y += alpha * A x`
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "mul_add dimension");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += alpha * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("transposed indices are in range")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// `max |A - A^T|`.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .into_iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate text dump: one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

/// `finalize` in the assembly pipeline: triplets to compressed rows.
pub fn finalize(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseMatrix> {
    SparseMatrix::from_triplets(n, n, triplets)
}

/// LU factors of one finalized matrix, reusable across right-hand sides.
pub struct Factorization {
    matrix: SparseMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("n", &self.matrix.nrows).field("nnz", &self.matrix.nnz()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `|Ax - b|_2 / max(1, |b|_2)`
    pub residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Factorizes a square sparse matrix (partial pivoting, fill-reducing
/// ordering). The factorization runs single-threaded.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    if a.nrows != a.ncols {
        return Err(Error::Dimension { expected: a.nrows, got: a.ncols });
    }
    if a.nrows == 0 {
        return Err(Error::Singular("empty system".into()));
    }
    let empty: Vec<usize> = (0..a.nrows).filter(|&i| a.row(i).all(|(_, v)| v == 0.0)).take(5).collect();
    if !empty.is_empty() {
        return Err(Error::Singular(format!("structurally zero rows, first: {empty:?}")));
    }
    faer::set_global_parallelism(Par::Seq);
    let triplets: Vec<Triplet<usize, usize, f64>> =
        a.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
        .map_err(|e| Error::Singular(format!("matrix construction failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::Singular(format!("LU failed: {e:?}")))?;
    Ok(Factorization { matrix: a.clone(), lu })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = faer::Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
        let mut r = b.to_vec();
        self.matrix.mul_add(-1.0, x, &mut r);
        let rel = norm2(&r) / norm2(b).max(1.0);
        (r, rel)
    }

    /// Solves `Ax = b`, refining iteratively until the residual bound holds.
    pub fn solve(&self, b: &[f64]) -> Result<Solution> {
        if b.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: b.len() });
        }
        let mut x = self.raw_solve(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("zero pivot encountered (non-finite solution)".into()));
        }
        let (mut r, mut rel) = self.residual(&x, b);
        for _ in 0..3 {
            if rel <= 1e-3 * RESIDUAL_TOL {
                break;
            }
            let dx = self.raw_solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            let (r2, rel2) = self.residual(&x, b);
            r = r2;
            rel = rel2;
        }
        if !(rel <= RESIDUAL_TOL) {
            return Err(Error::Residual { residual: rel, tolerance: RESIDUAL_TOL });
        }
        Ok(Solution { x, residual: rel })
    }
}

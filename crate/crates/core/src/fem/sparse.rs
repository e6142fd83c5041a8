//! Sparse matrices and direct solves.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::instrument;

fn sequential_kernels() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Square sparse matrix in compressed-column form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    /// Builds an `n x n` matrix; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<Self> {
        let inner = SparseColMat::try_new_from_triplets(n, n, triplets)
            .map_err(|e| Error::InvalidParameter(format!("sparse assembly failed: {e:?}")))?;
        Ok(SparseMatrix { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    /// Calls `f(row, col, value)` for every stored entry, column by column.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        let cp = self.inner.symbolic().col_ptr();
        let ri = self.inner.symbolic().row_idx();
        let v = self.inner.val();
        for j in 0..self.n() {
            for k in cp[j]..cp[j + 1] {
                f(ri[k], j, v[k]);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        let mut y = vec![0.0; self.n()];
        self.for_each(|i, j, v| y[i] += v * x[j]);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(|i, j, v| s += x[i] * v * y[j]);
        s
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n(), self.n());
        self.for_each(|i, j, v| m[(i, j)] += v);
        m
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for j in 0..self.n() {
            for i in 0..self.n() {
                num = num.max((d[(i, j)] - d[(j, i)]).abs());
                den = den.max(d[(i, j)].abs());
            }
        }
        num / den.max(f64::MIN_POSITIVE)
    }

    /// Restriction to the rows/columns with `keep[i] = Some(new index)`.
    pub fn restrict(&self, keep: &[Option<usize>], n_kept: usize) -> Result<SparseMatrix> {
        let mut trip = Vec::with_capacity(self.nnz());
        self.for_each(|i, j, v| {
            if let (Some(a), Some(b)) = (keep[i], keep[j]) {
                trip.push(Triplet::new(a, b, v));
            }
        });
        SparseMatrix::from_triplets(n_kept, &trip)
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n(), self.n(), self.nnz());
        self.for_each(|i, j, v| {
            let _ = writeln!(s, "{} {} {v:.16e}", i + 1, j + 1);
        });
        let path = path.as_ref();
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Sparse Cholesky factorization.
pub struct Factorization {
    llt: Llt<usize, f64>,
    n: usize,
}

impl Factorization {
    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Direct solver that reuses the symbolic analysis while the sparsity
/// pattern stays the same (as it does across morphing iterations).
#[derive(Default)]
pub struct Solver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLlt<usize>)>,
}

impl Solver {
    pub fn new() -> Self {
        Solver::default()
    }

    pub fn factorize(&mut self, a: &SparseMatrix) -> Result<Factorization> {
        sequential_kernels();
        let sym = a.inner.symbolic();
        let reuse = matches!(&self.cached, Some((cp, ri, _)) if cp == sym.col_ptr() && ri == sym.row_idx());
        if !reuse {
            let s = SymbolicLlt::try_new(sym, Side::Lower)
                .map_err(|e| Error::Singular(format!("symbolic analysis failed: {e:?}")))?;
            self.cached = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
        }
        let symbolic = self.cached.as_ref().expect("cached above").2.clone();
        instrument::count_factorization();
        let llt = Llt::try_new_with_symbolic(symbolic, a.inner.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Factorization { llt, n: a.n() })
    }
}

/// Solves `A x = b` with one fresh factorization.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let f = Solver::new().factorize(a)?;
    Ok(f.solve(b))
}

/// Solves `A x = b` where the entries of `x` with `fixed[i] = Some(v)` are
/// prescribed. The returned vector carries the prescribed values exactly.
pub fn solve_with_fixed(
    solver: &mut Solver,
    a: &SparseMatrix,
    b: &[f64],
    fixed: &[Option<f64>],
) -> Result<Vec<f64>> {
    let n = a.n();
    if fixed.iter().all(Option::is_none) {
        return Ok(solver.factorize(a)?.solve(b));
    }
    let mut keep = vec![None; n];
    let mut n_free = 0;
    for i in 0..n {
        if fixed[i].is_none() {
            keep[i] = Some(n_free);
            n_free += 1;
        }
    }
    let mut rhs: Vec<f64> = (0..n).filter(|&i| fixed[i].is_none()).map(|i| b[i]).collect();
    a.for_each(|i, j, v| {
        if let (Some(r), Some(x)) = (keep[i], fixed[j]) {
            rhs[r] -= v * x;
        }
    });
    let mut x: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if n_free > 0 {
        let sub = a.restrict(&keep, n_free)?;
        let y = solver.factorize(&sub)?.solve(&rhs);
        for i in 0..n {
            if let Some(r) = keep[i] {
                x[i] = y[r];
            }
        }
    }
    Ok(x)
}

/// `||A x - b|| / ||b||` (or `||A x||` when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

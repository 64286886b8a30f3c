//! Compressed sparse column storage with a fixed pattern, plus a thin wrapper
//! over faer's sparse LU that reuses the symbolic factorization.

use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut};

use crate::error::{Error, Result};

/// Sorted, duplicate-free CSC pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CscPattern {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl CscPattern {
    /// Builds the pattern from per-column row lists (any order, duplicates
    /// allowed).
    pub fn from_columns(nrows: usize, mut cols: Vec<Vec<usize>>) -> Self {
        let ncols = cols.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            debug_assert!(c.last().is_none_or(|&r| r < nrows));
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage position of `(row, col)`, if structurally present.
    #[inline]
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi]
            .binary_search(&row)
            .ok()
            .map(|i| lo + i)
    }

    pub fn column(&self, col: usize) -> (&[usize], std::ops::Range<usize>) {
        let r = self.col_ptr[col]..self.col_ptr[col + 1];
        (&self.row_idx[r.clone()], r)
    }

    fn faer_symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        SymbolicSparseColMatRef::new_checked(
            self.nrows,
            self.ncols,
            &self.col_ptr,
            None,
            &self.row_idx,
        )
    }
}

#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub pattern: Arc<CscPattern>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<CscPattern>) -> Self {
        let n = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    /// Adds `v` at `(row, col)`. Panics if the entry is not in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        match self.pattern.find(row, col) {
            Some(i) => self.values[i] += v,
            None => panic!("entry ({row}, {col}) outside the sparsity pattern"),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |i| self.values[i])
    }

    pub fn set_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.ncols() {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            let (rows, r) = self.pattern.column(c);
            for (row, v) in rows.iter().zip(&self.values[r]) {
                y[*row] += v * xc;
            }
        }
    }

    /// `y = A^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols() {
            let (rows, r) = self.pattern.column(c);
            y[c] = rows
                .iter()
                .zip(&self.values[r])
                .map(|(row, v)| v * x[*row])
                .sum();
        }
    }

    /// Zeroes the stored entries of row `row`.
    pub fn zero_row(&mut self, row: usize) {
        for c in 0..self.ncols() {
            if let Some(i) = self.pattern.find(row, c) {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn zero_col(&mut self, col: usize) {
        let (_, r) = self.pattern.column(col);
        for i in r {
            self.values[i] = 0.0;
        }
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.nrows(), self.ncols());
        for c in 0..self.ncols() {
            let (rows, r) = self.pattern.column(c);
            for (row, v) in rows.iter().zip(&self.values[r]) {
                m[(*row, c)] += v;
            }
        }
        m
    }

    pub fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.pattern.faer_symbolic(), &self.values)
    }
}

/// Index map extracting the rows `rows` and columns `cols` (both contiguous
/// ranges) of a matrix with a fixed pattern.
#[derive(Debug, Clone)]
pub struct SubmatrixMap {
    pub pattern: Arc<CscPattern>,
    source: Vec<usize>,
}

impl SubmatrixMap {
    pub fn new(
        parent: &CscPattern,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut source = Vec::new();
        for c in cols.clone() {
            let (rr, range) = parent.column(c);
            for (r, i) in rr.iter().zip(range) {
                if rows.contains(r) {
                    row_idx.push(r - rows.start);
                    source.push(i);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            pattern: Arc::new(CscPattern {
                nrows: rows.len(),
                ncols: cols.len(),
                col_ptr,
                row_idx,
            }),
            source,
        }
    }

    pub fn extract(&self, parent: &CscMatrix) -> CscMatrix {
        CscMatrix {
            pattern: self.pattern.clone(),
            values: self.source.iter().map(|&i| parent.values[i]).collect(),
        }
    }
}

/// Sparse LU that keeps its symbolic analysis across refactorizations of
/// matrices with the same pattern.
#[derive(Debug, Default)]
pub struct SparseLu {
    symbolic: Option<(Arc<CscPattern>, SymbolicLu<usize>)>,
    numeric: Option<Lu<usize, f64>>,
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorize(&mut self, a: &CscMatrix) -> Result<()> {
        let reuse = matches!(&self.symbolic, Some((p, _)) if Arc::ptr_eq(p, &a.pattern) || **p == *a.pattern);
        if !reuse {
            let sym = SymbolicLu::try_new(a.pattern.faer_symbolic())
                .map_err(|e| Error::Factorization(format!("symbolic analysis: {e:?}")))?;
            self.symbolic = Some((a.pattern.clone(), sym));
        }
        let sym = self.symbolic.as_ref().unwrap().1.clone();
        let lu = Lu::try_new_with_symbolic(sym, a.as_faer())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        self.numeric = Some(lu);
        Ok(())
    }

    pub fn is_factorized(&self) -> bool {
        self.numeric.is_some()
    }

    /// Solves in place. Non-finite output is reported as a singular factor.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let lu = self
            .numeric
            .as_ref()
            .ok_or_else(|| Error::Factorization("solve before factorization".into()))?;
        let n = rhs.len();
        lu.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(rhs, n, 1));
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Factorization(
                "singular matrix (non-finite solution)".into(),
            ))
        }
    }
}

//! Augmented-Lagrangian block preconditioner.
//!
//! For `J = [A~ B^T; B 0]` with `A~` already holding the augmentation
//! `gamma B^T M_p^-1 B`, one application is the product of the block factors
//!
//! ```text
//! y   = A~^-1 r_z
//! x_p = S~^-1 (r_p - B y)
//! x_z = y - A~^-1 B^T x_p
//! ```
//!
//! with `S~^-1 = -gamma M_p^-1`. `M_p` is the diagonal P0 mass matrix.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::assembly::{Assembler, LinearSystem};
use crate::error::{Error, Result};
use crate::sparse::{CscMatrix, SparseLu};

use super::krylov::{fgmres, TopBlockSolve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurApprox {
    /// `-gamma M_p^-1`.
    ScaledMass,
    /// Dense exact Schur complement `-B A~^-1 B^T`, for small checks only.
    ExactDense,
}

pub struct ALPreconditioner<'a> {
    top: CscMatrix,
    b: CscMatrix,
    bt: CscMatrix,
    inv_mass: Vec<f64>,
    gamma: f64,
    exact: Option<PartialPivLu<f64>>,
    lu: &'a SparseLu,
    mode: TopBlockSolve,
    top_len: usize,
}

impl<'a> ALPreconditioner<'a> {
    /// Factors the top block of `sys` into `lu`.
    pub fn factor_top(asm: &Assembler, sys: &LinearSystem, lu: &mut SparseLu) -> Result<()> {
        lu.factorize(&asm.top_map().extract(&sys.matrix))
    }

    /// Extracts the blocks of `sys`. `lu` must hold a factorization of the
    /// top block, exact for `TopBlockSolve::Direct` and possibly lagged for
    /// `TopBlockSolve::Inner`.
    pub fn new(
        asm: &Assembler,
        sys: &LinearSystem,
        schur: SchurApprox,
        mode: TopBlockSolve,
        lu: &'a SparseLu,
    ) -> Result<Self> {
        let gamma = asm.setup.gamma;
        if schur == SchurApprox::ScaledMass && gamma == 0.0 {
            return Err(Error::DegenerateSchur);
        }
        if !lu.is_factorized() {
            return Err(Error::Factorization("top block is not factorized".into()));
        }
        let top = asm.top_map().extract(&sys.matrix);
        let b = asm.b_map().extract(&sys.matrix);
        let bt = asm.bt_map().extract(&sys.matrix);
        let mesh = &asm.disc.mesh;
        let inv_mass: Vec<f64> = (0..mesh.num_cells())
            .map(|k| 1.0 / mesh.cell_area(k))
            .collect();
        let mut pre = Self {
            top,
            b,
            bt,
            inv_mass,
            gamma,
            exact: None,
            lu,
            mode,
            top_len: sys.top_len(),
        };
        if schur == SchurApprox::ExactDense {
            pre.exact = Some(pre.dense_schur()?);
        }
        Ok(pre)
    }

    fn dense_schur(&self) -> Result<PartialPivLu<f64>> {
        let np = self.b.nrows();
        let mut s = Mat::<f64>::zeros(np, np);
        let mut e = vec![0.0; np];
        let mut col = vec![0.0; self.top_len];
        let mut bcol = vec![0.0; np];
        for j in 0..np {
            e[j] = 1.0;
            self.bt.mul_vec(&e, &mut col);
            e[j] = 0.0;
            let y = self.solve_top(&col)?;
            self.b.mul_vec(&y, &mut bcol);
            for i in 0..np {
                s[(i, j)] = -bcol[i];
            }
        }
        let lu = s.partial_piv_lu();
        let probe = lu.solve(Mat::<f64>::from_fn(np, 1, |_, _| 1.0));
        if (0..np).any(|i| !probe[(i, 0)].is_finite()) {
            return Err(Error::DegenerateSchur);
        }
        Ok(lu)
    }

    pub fn solve_top(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            TopBlockSolve::Direct => {
                let mut y = r.to_vec();
                self.lu.solve_in_place(&mut y)?;
                Ok(y)
            }
            TopBlockSolve::Inner {
                tol,
                max_iterations,
            } => {
                let out = fgmres(
                    |x, y| self.top.mul_vec(x, y),
                    |v| {
                        let mut y = v.to_vec();
                        self.lu.solve_in_place(&mut y)?;
                        Ok(y)
                    },
                    r,
                    max_iterations,
                    tol,
                    0.0,
                    max_iterations,
                )?;
                Ok(out.x)
            }
        }
    }

    /// Applies the preconditioner to a full-length vector.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let (rz, rp) = r.split_at(self.top_len);
        let y = self.solve_top(rz)?;
        let mut t = vec![0.0; rp.len()];
        self.b.mul_vec(&y, &mut t);
        t.iter_mut().zip(rp).for_each(|(ti, ri)| *ti = ri - *ti);
        let xp: Vec<f64> = match &self.exact {
            Some(lu) => {
                let sol = lu.solve(Mat::<f64>::from_fn(t.len(), 1, |i, _| t[i]));
                (0..t.len()).map(|i| sol[(i, 0)]).collect()
            }
            None => t
                .iter()
                .zip(&self.inv_mass)
                .map(|(ti, m)| -self.gamma * m * ti)
                .collect(),
        };
        let mut w = vec![0.0; self.top_len];
        self.bt.mul_vec(&xp, &mut w);
        let c = self.solve_top(&w)?;
        let mut out = y;
        out.iter_mut().zip(&c).for_each(|(a, b)| *a -= b);
        out.extend_from_slice(&xp);
        Ok(out)
    }
}

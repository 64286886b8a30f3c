//! Restarted flexible GMRES with right preconditioning.

use crate::error::{Error, Result};

/// How the augmented top block is inverted inside the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopBlockSolve {
    /// Sparse LU of the current top block.
    Direct,
    /// GMRES on the top block, preconditioned by a lagged LU that is only
    /// refreshed when the inner iteration stalls.
    Inner { tol: f64, max_iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub restart: usize,
    /// Relative tolerance on the unpreconditioned residual.
    pub tol: f64,
    pub max_iterations: usize,
    pub top_solve: TopBlockSolve,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            restart: 50,
            tol: 1e-10,
            max_iterations: 500,
            top_solve: TopBlockSolve::Direct,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart < 1 {
            return Err(Error::InvalidParameter(
                "Krylov restart must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Krylov tolerance must be positive, got {}",
                self.tol
            )));
        }
        if let TopBlockSolve::Inner { tol, .. } = self.top_solve {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "inner tolerance must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|b - A x| / |b|`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from a zero initial guess until
/// `|b - A x| <= max(tol |b|, atol)`. `precond` may change between
/// iterations. Fails if the tolerance is not met within `max_iterations`.
pub fn fgmres<A, P>(
    apply_a: A,
    mut precond: P,
    b: &[f64],
    restart: usize,
    tol: f64,
    atol: f64,
    max_iterations: usize,
) -> Result<KrylovOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let m = restart.max(1);
    let stop = (tol * bnorm).max(atol);
    let mut r = b.to_vec();
    let mut total = 0;
    let mut ax = vec![0.0; n];
    loop {
        let beta = norm(&r);
        if beta <= stop {
            return Ok(KrylovOutcome {
                x,
                iterations: total,
                relative_residual: beta / bnorm,
            });
        }
        if total >= max_iterations {
            return Err(Error::KrylovBreakdown(format!(
                "no convergence after {total} iterations (relative residual {:.3e})",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|a| a / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iterations {
            let zk = precond(&v[k])?;
            let mut w = vec![0.0; n];
            apply_a(&zk, &mut w);
            z.push(zk);
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                w.iter_mut().zip(&v[i]).for_each(|(a, b)| *a -= hik * b);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(Error::KrylovBreakdown("zero Hessenberg column".into()));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if !g[k].is_finite() {
                return Err(Error::KrylovBreakdown(
                    "non-finite residual estimate".into(),
                ));
            }
            if g[k].abs() <= stop || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|a| a / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(a, b)| *a += yi * b);
        }
        apply_a(&x, &mut ax);
        r.iter_mut()
            .zip(b.iter().zip(&ax))
            .for_each(|(ri, (bi, ai))| *ri = bi - ai);
    }
}

//! Newton's method with an error-oriented line search, parameter
//! continuation, and the linear solvers used for each Newton correction.

mod krylov;
mod precond;

use log::{info, warn};

use crate::assembly::{Assembler, DiscreteState, LinearSystem};
use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::sparse::{CscMatrix, SparseLu};

pub use krylov::{fgmres, KrylovConfig, KrylovOutcome, TopBlockSolve};
pub use precond::{ALPreconditioner, SchurApprox};

/// Forces sequential dense and sparse kernels in faer. Assembly is
/// deterministic regardless of the thread count.
pub fn set_deterministic(on: bool) {
    faer::set_global_parallelism(if on {
        faer::Par::Seq
    } else {
        faer::Par::rayon(0)
    });
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineSearch {
    /// Halve until the simplified Newton correction contracts:
    /// `|dx_bar| <= (1 - lambda / 4) |dx|`.
    Backtracking,
    FullStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    /// FGMRES with the augmented-Lagrangian block preconditioner.
    Krylov {
        config: KrylovConfig,
        schur: SchurApprox,
    },
    /// Sparse LU of the whole saddle-point matrix.
    Direct,
    /// Krylov when `gamma > 0`, direct otherwise.
    Auto(KrylovConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    /// Krylov tolerance fixed at the configured value.
    Fixed,
    /// `eta_k = 0.9 (|F_k| / |F_k-1|)^2`, clipped to `[tol, 1e-4]`.
    EisenstatWalker,
}

/// One stage of a continuation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationStage {
    pub eps: f64,
    pub eu: f64,
    pub re: f64,
}

impl ContinuationStage {
    pub fn of(p: &ConstitutiveParams) -> Self {
        Self {
            eps: p.eps,
            eu: p.eu,
            re: p.re,
        }
    }

    pub fn apply(&self, base: &ConstitutiveParams) -> ConstitutiveParams {
        ConstitutiveParams {
            eps: self.eps,
            eu: self.eu,
            re: self.re,
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub line_search: LineSearch,
    pub linear: LinearSolver,
    pub forcing: Forcing,
    /// Re-solve the constitutive equation cellwise after every step, and once
    /// more at convergence.
    pub local_stress_update: bool,
    /// One extra solve at convergence against the pressure-row residual
    /// only. Applies to the iterative linear solver.
    pub divergence_correction: bool,
    /// Stages ending at the target parameters. Empty means a single solve.
    pub schedule: Vec<ContinuationStage>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_iterations: 50,
            line_search: LineSearch::Backtracking,
            linear: LinearSolver::Auto(KrylovConfig::default()),
            forcing: Forcing::Fixed,
            local_stress_update: true,
            divergence_correction: true,
            schedule: Vec::new(),
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "Newton tolerances must be positive".into(),
            ));
        }
        match self.linear {
            LinearSolver::Krylov { config, .. } | LinearSolver::Auto(config) => {
                config.validate()?
            }
            LinearSolver::Direct => {}
        }
        for s in &self.schedule {
            if !(s.eps > 0.0 && s.eu >= 0.0 && s.re >= 0.0)
                || !(s.eps.is_finite() && s.eu.is_finite() && s.re.is_finite())
            {
                return Err(Error::InvalidParameter(format!(
                    "invalid continuation stage {s:?}"
                )));
            }
        }
        let monotone = |f: fn(&ContinuationStage) -> f64| {
            let v: Vec<f64> = self.schedule.iter().map(f).collect();
            v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1])
        };
        if !(monotone(|s| s.eps) && monotone(|s| s.eu) && monotone(|s| s.re)) {
            return Err(Error::InvalidParameter(
                "continuation schedule must be monotone in each parameter".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norms, starting with the initial one.
    pub residuals: Vec<f64>,
    pub steps: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
    /// Residual norm after the final polish, if it was kept.
    pub polished_residual: Option<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.polished_residual
            .or(self.residuals.last().copied())
            .unwrap_or(0.0)
    }

    pub fn total_krylov(&self) -> usize {
        self.krylov_iterations.iter().sum()
    }

    /// `iteration,residual,step,krylov` lines; iteration 0 has no step.
    pub fn csv_lines(&self) -> Vec<String> {
        let mut out = vec!["iteration,residual,step,krylov".to_string()];
        for (i, r) in self.residuals.iter().enumerate() {
            if i == 0 {
                out.push(format!("0,{r:.6e},,"));
            } else {
                out.push(format!(
                    "{i},{r:.6e},{},{}",
                    self.steps[i - 1],
                    self.krylov_iterations[i - 1]
                ));
            }
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[allow(clippy::large_enum_variant)]
enum StepSolver<'a> {
    Krylov {
        pre: ALPreconditioner<'a>,
        matrix: &'a CscMatrix,
        config: KrylovConfig,
    },
    Direct {
        lu: &'a SparseLu,
        pin: Option<usize>,
    },
}

impl StepSolver<'_> {
    /// Solves `J dx = rhs`, returning the correction and the Krylov count.
    fn solve(&self, rhs: &[f64], tol: f64, atol: f64) -> Result<(Vec<f64>, usize)> {
        match self {
            StepSolver::Krylov {
                pre,
                matrix,
                config,
            } => {
                let out = fgmres(
                    |x, y| matrix.mul_vec(x, y),
                    |v| pre.apply(v),
                    rhs,
                    config.restart,
                    tol,
                    atol,
                    config.max_iterations,
                )?;
                Ok((out.x, out.iterations))
            }
            StepSolver::Direct { lu, pin } => {
                let mut x = rhs.to_vec();
                if let Some(i) = pin {
                    x[*i] = 0.0;
                }
                lu.solve_in_place(&mut x)?;
                Ok((x, 0))
            }
        }
    }
}

/// Reusable factorization storage across Newton iterations.
#[derive(Default)]
struct Factors {
    top: SparseLu,
    full: SparseLu,
}

fn resolve(asm: &Assembler, linear: LinearSolver) -> LinearSolver {
    match linear {
        LinearSolver::Auto(config) if asm.setup.gamma > 0.0 => LinearSolver::Krylov {
            config,
            schur: SchurApprox::ScaledMass,
        },
        LinearSolver::Auto(_) => LinearSolver::Direct,
        other => other,
    }
}

/// Factors whatever the linear solver needs for `sys`. In inner-iteration
/// mode the top-block factorization is only refreshed on request.
fn prepare(
    asm: &Assembler,
    sys: &LinearSystem,
    linear: LinearSolver,
    factors: &mut Factors,
    refresh: bool,
) -> Result<()> {
    match resolve(asm, linear) {
        LinearSolver::Krylov { config, .. } => {
            let lagged = matches!(config.top_solve, TopBlockSolve::Inner { .. });
            if !lagged || refresh || !factors.top.is_factorized() {
                ALPreconditioner::factor_top(asm, sys, &mut factors.top)?;
            }
            Ok(())
        }
        _ => {
            if sys.pressure_nullspace {
                let i = sys.layout.pressure(0);
                let mut m = sys.matrix.clone();
                m.zero_row(i);
                m.zero_col(i);
                m.add(i, i, 1.0);
                factors.full.factorize(&m)
            } else {
                factors.full.factorize(&sys.matrix)
            }
        }
    }
}

fn step_solver<'a>(
    asm: &Assembler,
    sys: &'a LinearSystem,
    linear: LinearSolver,
    factors: &'a Factors,
) -> Result<StepSolver<'a>> {
    match resolve(asm, linear) {
        LinearSolver::Krylov { config, schur } => Ok(StepSolver::Krylov {
            pre: ALPreconditioner::new(asm, sys, schur, config.top_solve, &factors.top)?,
            matrix: &sys.matrix,
            config,
        }),
        _ => Ok(StepSolver::Direct {
            lu: &factors.full,
            pin: sys.pressure_nullspace.then(|| sys.layout.pressure(0)),
        }),
    }
}

fn finish_step(asm: &Assembler, x: &mut [f64], local: bool) -> Result<()> {
    if asm.bdata.pressure_nullspace {
        let r = asm.layout().pressure_range();
        asm.disc.pressure.project_zero_mean(&mut x[r]);
    }
    if local {
        asm.local_stress_update(x)?;
    }
    Ok(())
}

/// Relative tolerance of the divergence correction solve.
const DIVERGENCE_TOL: f64 = 1e-8;

/// Final cleanup of a converged iterate, kept only if the residual stays
/// within `target`. With an iterative linear solver the last correction stops
/// at an absolute floor, leaving a residual in the pressure rows; one more
/// solve of `J dx = [0, -F_p]` removes it without disturbing the other rows.
/// The local stress update follows.
fn polish(
    asm: &Assembler,
    x: &mut Vec<f64>,
    cfg: &NewtonConfig,
    target: f64,
    factors: &mut Factors,
    report: &mut NewtonReport,
) -> Result<()> {
    let krylov = matches!(resolve(asm, cfg.linear), LinearSolver::Krylov { .. });
    let correct = cfg.divergence_correction && krylov;
    if !(correct || cfg.local_stress_update) {
        return Ok(());
    }
    let mut xp = x.clone();
    if correct {
        let sys = asm.jacobian(&xp)?;
        let mut rhs = sys.rhs.clone();
        rhs[..sys.layout.top_len()]
            .iter_mut()
            .for_each(|v| *v = 0.0);
        if norm(&rhs) > 0.0 {
            prepare(asm, &sys, cfg.linear, factors, true)?;
            match step_solver(asm, &sys, cfg.linear, factors)?.solve(&rhs, DIVERGENCE_TOL, 0.0) {
                Ok((dx, _)) => {
                    xp.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                    finish_step(asm, &mut xp, false)?;
                }
                Err(e) => warn!("divergence correction skipped: {e}"),
            }
        }
    }
    if cfg.local_stress_update {
        asm.local_stress_update(&mut xp)?;
    }
    let rp = norm(&asm.residual(&xp)?);
    if rp <= target {
        *x = xp;
        report.polished_residual = Some(rp);
    } else {
        warn!("polish raised the residual to {rp:.3e}; keeping the Newton iterate");
    }
    Ok(())
}

/// Solves `F(x) = 0` starting from `state`, which always holds the last
/// iterate on return, including on failure.
pub fn newton_solve(
    asm: &Assembler,
    state: &mut DiscreteState,
    cfg: &NewtonConfig,
) -> Result<NewtonReport> {
    cfg.validate()?;
    let x = &mut state.x;
    asm.impose_dirichlet(x);
    let mut report = NewtonReport::default();
    let mut r = asm.residual(x)?;
    let mut rn = norm(&r);
    report.residuals.push(rn);
    let target = cfg.abs_tol.max(cfg.rel_tol * rn);
    info!("newton,0,{rn:.6e},,");
    let krylov_tol = match cfg.linear {
        LinearSolver::Krylov { config, .. } | LinearSolver::Auto(config) => config.tol,
        LinearSolver::Direct => 0.0,
    };
    let inner_mode = matches!(
        cfg.linear,
        LinearSolver::Krylov {
            config: KrylovConfig {
                top_solve: TopBlockSolve::Inner { .. },
                ..
            },
            ..
        } | LinearSolver::Auto(KrylovConfig {
            top_solve: TopBlockSolve::Inner { .. },
            ..
        })
    );
    let mut factors = Factors::default();
    let mut eta = match cfg.forcing {
        Forcing::Fixed => krylov_tol,
        Forcing::EisenstatWalker => 1e-4f64.max(krylov_tol),
    };
    for it in 0..=cfg.max_iterations {
        if rn <= target {
            if it > 0 {
                polish(asm, x, cfg, target, &mut factors, &mut report)?;
            }
            return Ok(report);
        }
        if it == cfg.max_iterations {
            break;
        }
        let wrap = |e: Error| Error::LinearSolve {
            iteration: it + 1,
            source: Box::new(e),
        };
        let sys = asm.jacobian(x)?;
        let mut refresh = false;
        let (dx, mut kry) = loop {
            prepare(asm, &sys, cfg.linear, &mut factors, refresh).map_err(wrap)?;
            let solver = step_solver(asm, &sys, cfg.linear, &factors).map_err(wrap)?;
            match solver.solve(&sys.rhs, eta, 1e-2 * target) {
                Ok(out) => break out,
                Err(Error::KrylovBreakdown(_)) if inner_mode && !refresh => refresh = true,
                Err(e) => return Err(wrap(e)),
            }
        };
        let solver = step_solver(asm, &sys, cfg.linear, &factors).map_err(wrap)?;
        let dxn = norm(&dx);
        let mut lambda = 1.0f64;
        let (xt, rt) = loop {
            let mut xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            let trial =
                finish_step(asm, &mut xt, cfg.local_stress_update).and_then(|_| asm.residual(&xt));
            match (cfg.line_search, trial) {
                (LineSearch::FullStep, Ok(rt)) => break (xt, rt),
                (LineSearch::FullStep, Err(e)) => return Err(e),
                (LineSearch::Backtracking, Ok(rt)) => {
                    let neg: Vec<f64> = rt.iter().map(|v| -v).collect();
                    let (dxbar, k) = solver.solve(&neg, eta, 1e-2 * target).map_err(wrap)?;
                    kry += k;
                    if norm(&dxbar) <= (1.0 - lambda / 4.0) * dxn || dxn == 0.0 {
                        break (xt, rt);
                    }
                }
                (
                    LineSearch::Backtracking,
                    Err(Error::NonFinite { .. } | Error::ScalarSolve { .. }),
                ) => {}
                (LineSearch::Backtracking, Err(e)) => return Err(e),
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(Error::LineSearch {
                    iteration: it + 1,
                    step: lambda,
                });
            }
        };
        *x = xt;
        r = rt;
        let prev = rn;
        rn = norm(&r);
        report.iterations = it + 1;
        report.residuals.push(rn);
        report.steps.push(lambda);
        report.krylov_iterations.push(kry);
        info!("newton,{},{rn:.6e},{lambda},{kry}", it + 1);
        if cfg.forcing == Forcing::EisenstatWalker {
            eta = (0.9 * (rn / prev).powi(2)).clamp(krylov_tol, 1e-4);
        }
    }
    Err(Error::NewtonMaxIterations {
        iterations: cfg.max_iterations,
        residual: rn,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuationReport {
    pub stages: Vec<(ContinuationStage, NewtonReport)>,
}

impl ContinuationReport {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|(_, r)| r.iterations).sum()
    }

    pub fn last(&self) -> Option<&NewtonReport> {
        self.stages.last().map(|(_, r)| r)
    }
}

/// Solves along `cfg.schedule`, warm-starting each stage. The schedule must
/// end at the assembler's current parameters, which are restored on return.
pub fn continuation_drive(
    asm: &mut Assembler,
    state: &mut DiscreteState,
    cfg: &NewtonConfig,
) -> Result<ContinuationReport> {
    cfg.validate()?;
    let target = asm.setup.params;
    let schedule = if cfg.schedule.is_empty() {
        vec![ContinuationStage::of(&target)]
    } else {
        cfg.schedule.clone()
    };
    if *schedule.last().unwrap() != ContinuationStage::of(&target) {
        return Err(Error::InvalidParameter(format!(
            "continuation schedule ends at {:?}, target is {:?}",
            schedule.last().unwrap(),
            ContinuationStage::of(&target)
        )));
    }
    let single = NewtonConfig {
        schedule: Vec::new(),
        ..cfg.clone()
    };
    let mut report = ContinuationReport::default();
    for (i, stage) in schedule.iter().enumerate() {
        asm.set_params(stage.apply(&target))?;
        info!(
            "continuation,{i},eps={},eu={},re={}",
            stage.eps, stage.eu, stage.re
        );
        let res = newton_solve(asm, state, &single);
        match res {
            Ok(r) => report.stages.push((*stage, r)),
            Err(e) => {
                asm.set_params(target)?;
                return Err(Error::Continuation {
                    stage: i,
                    source: Box::new(e),
                });
            }
        }
    }
    asm.set_params(target)?;
    Ok(report)
}

/// Solves the linear Stokes problem (`Eu = Re = 0`) from the current state,
/// then runs [`continuation_drive`] from that solution. Newton rarely
/// converges for the nonlinear problems from a cold start. The Stokes solve is
/// reported as the first stage.
pub fn solve_from_stokes(
    asm: &mut Assembler,
    state: &mut DiscreteState,
    cfg: &NewtonConfig,
) -> Result<ContinuationReport> {
    cfg.validate()?;
    let target = asm.setup.params;
    let stokes = ContinuationStage {
        eps: target.eps,
        eu: 0.0,
        re: 0.0,
    };
    let mut report = ContinuationReport::default();
    if stokes != ContinuationStage::of(&target) {
        asm.set_params(stokes.apply(&target))?;
        let single = NewtonConfig {
            schedule: Vec::new(),
            ..cfg.clone()
        };
        let res = newton_solve(asm, state, &single);
        asm.set_params(target)?;
        report.stages.push((stokes, res?));
    }
    let rest = continuation_drive(asm, state, cfg)?;
    report.stages.extend(rest.stages);
    Ok(report)
}

#[cfg(test)]
mod tests;

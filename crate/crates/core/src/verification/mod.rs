//! Independent oracles behind the acceptance checks: the semi-analytic
//! channel profile, a manufactured solution, and error-order fits.

mod manufactured;
mod oracle;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::assembly::{vector_field, Assembler, BoundaryCondition, Discretization, ProblemSetup};
use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::fem::{EDGE_GAUSS3, TRIANGLE_DEGREE4};
use crate::mesh::{
    generate_rectangle, refine_uniform, BoundaryMarker, MarkerScheme, SplitKind, Triangulation,
};
use crate::postprocess::write_atomic;
use crate::solver::{solve_from_stokes, ContinuationStage, NewtonConfig};
use crate::tensor::{Mat2, SymTensor2, Vec2};

pub use manufactured::ManufacturedCase;
pub use oracle::{adaptive_gk15, adaptive_simpson, ChannelOracle};

/// Errors below this are treated as rounding noise and get no fitted order.
pub const ROUNDING_LEVEL: f64 = 1e-10;

/// Least-squares slope of `log e` against `log h`. `None` when every error
/// is at rounding level or fewer than two points are usable.
pub fn fit_order(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() != e.len()
        || h.len() < 2
        || e.iter().all(|&v| v < ROUNDING_LEVEL)
        || e.iter().any(|&v| !(v > 0.0))
    {
        return None;
    }
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Error of one quantity across a refinement sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub name: &'static str,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorSeries {
    pub fn order(&self) -> Option<f64> {
        fit_order(&self.h, &self.errors)
    }

    /// Strictly decreasing under refinement.
    pub fn is_monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelInfo {
    pub h: f64,
    pub cells: usize,
    pub dofs: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub levels: Vec<LevelInfo>,
    pub series: Vec<ErrorSeries>,
}

impl ConvergenceStudy {
    pub fn series(&self, name: &str) -> Option<&ErrorSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn order(&self, name: &str) -> Option<f64> {
        self.series(name).and_then(ErrorSeries::order)
    }

    /// Names of the series whose errors do not decrease monotonically.
    pub fn non_monotone(&self) -> Vec<&'static str> {
        self.series
            .iter()
            .filter(|s| !s.is_monotone())
            .map(|s| s.name)
            .collect()
    }

    fn new(levels: Vec<LevelInfo>, names: &[&'static str], rows: &[Vec<f64>]) -> Self {
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let series = names
            .iter()
            .enumerate()
            .map(|(i, &name)| ErrorSeries {
                name,
                h: h.clone(),
                errors: rows.iter().map(|r| r[i]).collect(),
            })
            .collect();
        Self { levels, series }
    }
}

pub const VELOCITY_L2: &str = "velocity_l2";
pub const VELOCITY_DG: &str = "velocity_dg";
pub const STRESS_L2: &str = "stress_l2";
pub const PRESSURE_L2: &str = "pressure_l2";

fn hierarchy(base: &Triangulation, levels: usize) -> Result<Vec<Arc<Triangulation>>> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let mut out = vec![Arc::new(base.clone())];
    while out.len() < levels {
        let next = refine_uniform(out.last().unwrap());
        out.push(Arc::new(next));
    }
    Ok(out)
}

/// `(sum_K |grad v_h - grad v|^2 + sum_F h^-1 |[[(v_h - v) (x) n]]|^2)^(1/2)`
/// with `v` continuous, so interior jumps of the exact field vanish.
pub fn dg_error<F, G>(disc: &Discretization, v: &[f64], exact: F, grad: G) -> f64
where
    F: Fn(Vec2) -> Vec2,
    G: Fn(Vec2) -> Mat2,
{
    let vs = &disc.velocity;
    let mesh = &disc.mesh;
    let mut sum = 0.0;
    for k in 0..mesh.num_cells() {
        let gh = vs.gradient(v, k);
        let p = mesh.cell_points(k);
        for (x, w) in TRIANGLE_DEGREE4.points_on(&p) {
            let g = grad(x);
            let d: f64 = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (gh[i][j] - g[i][j]).powi(2))
                .sum();
            sum += mesh.cell_area(k) * w * d;
        }
    }
    for (i, f) in mesh.facets().iter().enumerate() {
        let [a, b] = mesh.facet_points(i);
        for (x, _, w) in EDGE_GAUSS3.points_on(a, b) {
            let (mut j, _) = vs.jump_average(v, i, x);
            if f.is_boundary() {
                let u = exact(x);
                for r in 0..2 {
                    for c in 0..2 {
                        j[r][c] -= u[r] * f.normal[c];
                    }
                }
            }
            // weight |F| w / h_F with h_F = |F|
            sum += w * j.iter().flatten().map(|v| v * v).sum::<f64>();
        }
    }
    sum.sqrt()
}

pub fn stress_l2_error<F: Fn(Vec2) -> SymTensor2>(
    disc: &Discretization,
    s: &[f64],
    exact: F,
) -> f64 {
    let mesh = &disc.mesh;
    let mut sum = 0.0;
    for k in 0..mesh.num_cells() {
        let sh = disc.stress.get(s, k);
        for (x, w) in TRIANGLE_DEGREE4.points_on(&mesh.cell_points(k)) {
            let e = exact(x);
            sum +=
                mesh.cell_area(k) * w * SymTensor2::new(sh.xx - e.xx, sh.xy - e.xy).norm().powi(2);
        }
    }
    sum.sqrt()
}

/// Both pressures are shifted to zero mean before comparison.
pub fn pressure_l2_error<F: Fn(Vec2) -> f64>(disc: &Discretization, p: &[f64], exact: F) -> f64 {
    let mesh = &disc.mesh;
    let mean_h = disc.pressure.mean(p);
    let mut mean = 0.0;
    for k in 0..mesh.num_cells() {
        for (x, w) in TRIANGLE_DEGREE4.points_on(&mesh.cell_points(k)) {
            mean += mesh.cell_area(k) * w * exact(x);
        }
    }
    mean /= mesh.total_area();
    let mut sum = 0.0;
    for k in 0..mesh.num_cells() {
        for (x, w) in TRIANGLE_DEGREE4.points_on(&mesh.cell_points(k)) {
            sum += mesh.cell_area(k) * w * ((p[k] - mean_h) - (exact(x) - mean)).powi(2);
        }
    }
    sum.sqrt()
}

/// Solves the manufactured problem on `levels` uniform refinements of `base`
/// (an all-wall mesh) and fits orders for velocity (L2 and DG), stress and
/// pressure.
pub fn convergence_study(
    case: &ManufacturedCase,
    base: &Triangulation,
    levels: usize,
    cfg: &NewtonConfig,
) -> Result<ConvergenceStudy> {
    let mut infos = Vec::new();
    let mut rows = Vec::new();
    for mesh in hierarchy(base, levels)? {
        let disc = Arc::new(Discretization::new(mesh.clone()));
        let mut asm = Assembler::new(disc.clone(), case.problem_setup())?;
        let mut state = asm.initial_state();
        let report = solve_from_stokes(&mut asm, &mut state, cfg)?;
        let l = asm.layout();
        let x = &state.x;
        rows.push(vec![
            disc.velocity
                .l2_error(&x[l.velocity_range()], |y| case.velocity(y)),
            dg_error(
                &disc,
                &x[l.velocity_range()],
                |y| case.velocity(y),
                |y| case.velocity_gradient(y),
            ),
            stress_l2_error(&disc, &x[l.stress_range()], |y| {
                case.stress(y)
                    .unwrap_or(SymTensor2::new(f64::NAN, f64::NAN))
            }),
            pressure_l2_error(&disc, &x[l.pressure_range()], |y| case.pressure(y)),
        ]);
        infos.push(LevelInfo {
            h: mesh.max_facet_length(),
            cells: mesh.num_cells(),
            dofs: l.len(),
            newton_iterations: report.total_iterations(),
        });
    }
    Ok(ConvergenceStudy::new(
        infos,
        &[VELOCITY_L2, VELOCITY_DG, STRESS_L2, PRESSURE_L2],
        &rows,
    ))
}

/// Best-approximation check: BDM interpolation error of the manufactured
/// velocity, no solve involved.
pub fn interpolation_study(
    case: &ManufacturedCase,
    base: &Triangulation,
    levels: usize,
) -> Result<ConvergenceStudy> {
    let mut infos = Vec::new();
    let mut rows = Vec::new();
    for mesh in hierarchy(base, levels)? {
        let disc = Discretization::new(mesh.clone());
        let v = disc.velocity.interpolate(|y| case.velocity(y));
        rows.push(vec![
            disc.velocity.l2_error(&v, |y| case.velocity(y)),
            dg_error(
                &disc,
                &v,
                |y| case.velocity(y),
                |y| case.velocity_gradient(y),
            ),
        ]);
        infos.push(LevelInfo {
            h: mesh.max_facet_length(),
            cells: mesh.num_cells(),
            dofs: disc.velocity.dim(),
            newton_iterations: 0,
        });
    }
    Ok(ConvergenceStudy::new(
        infos,
        &[VELOCITY_L2, VELOCITY_DG],
        &rows,
    ))
}

/// Channel `(0, length) x (-h, h)` with the oracle profile prescribed at both
/// ends and no-slip walls.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCase {
    pub oracle: ChannelOracle,
    pub length: f64,
    /// Cells of the coarsest mesh along `x` and `y`.
    pub base_cells: (usize, usize),
    /// Regularization path, ending at the oracle's `eps`. Empty means a single
    /// solve after the Stokes start.
    pub eps_schedule: Vec<f64>,
}

impl ChannelCase {
    pub fn new(params: ConstitutiveParams) -> Self {
        let eps_schedule = if params.eu > 0.0 {
            [0.1, 0.01, 0.001]
                .into_iter()
                .filter(|&e| e > params.eps)
                .chain([params.eps])
                .collect()
        } else {
            Vec::new()
        };
        Self {
            oracle: ChannelOracle::new(1.0, 1.0, params),
            length: 5.0,
            base_cells: (10, 4),
            eps_schedule,
        }
    }

    pub fn base_mesh(&self) -> Result<Triangulation> {
        let h = self.oracle.h;
        generate_rectangle(
            self.base_cells.0,
            self.base_cells.1,
            (0.0, self.length),
            (-h, h),
            SplitKind::Diagonal,
            MarkerScheme::Channel,
        )
    }

    /// Without the augmented Lagrangian term, so Newton is solved with a
    /// direct factorization and reaches tight residuals.
    pub fn problem_setup(&self) -> ProblemSetup {
        let o = self.oracle;
        let profile = vector_field(move |x| [o.exact(x[1]), 0.0]);
        let mut setup = ProblemSetup::new(o.params);
        setup.gamma = 0.0;
        setup
            .with_condition(
                BoundaryMarker::Inflow,
                BoundaryCondition::Dirichlet(profile.clone()),
            )
            .with_condition(
                BoundaryMarker::Outflow,
                BoundaryCondition::Dirichlet(profile),
            )
            .with_condition(
                BoundaryMarker::Wall,
                BoundaryCondition::Dirichlet(vector_field(|_| [0.0; 2])),
            )
    }

    pub fn newton_config(&self) -> NewtonConfig {
        let p = self.oracle.params;
        NewtonConfig {
            schedule: self
                .eps_schedule
                .iter()
                .map(|&eps| ContinuationStage {
                    eps,
                    eu: p.eu,
                    re: p.re,
                })
                .collect(),
            ..NewtonConfig::default()
        }
    }

    /// Velocity L2 error against the oracle on `levels` meshes.
    pub fn study(&self, levels: usize) -> Result<ConvergenceStudy> {
        let cfg = self.newton_config();
        let o = self.oracle;
        let mut infos = Vec::new();
        let mut rows = Vec::new();
        for mesh in hierarchy(&self.base_mesh()?, levels)? {
            let disc = Arc::new(Discretization::new(mesh.clone()));
            let mut asm = Assembler::new(disc.clone(), self.problem_setup())?;
            let mut state = asm.initial_state();
            let report = solve_from_stokes(&mut asm, &mut state, &cfg)?;
            let v = state.v();
            rows.push(vec![disc.velocity.l2_error(v, |x| [o.exact(x[1]), 0.0])]);
            infos.push(LevelInfo {
                h: mesh.max_facet_length(),
                cells: mesh.num_cells(),
                dofs: asm.layout().len(),
                newton_iterations: report.total_iterations(),
            });
        }
        Ok(ConvergenceStudy::new(infos, &[VELOCITY_L2], &rows))
    }
}

/// `y,u` table of the oracle profile.
pub fn write_oracle_csv(oracle: &ChannelOracle, n: usize, path: &Path) -> Result<()> {
    let mut s = String::from("y,u\n");
    for (y, u) in oracle.tabulate(n) {
        let _ = writeln!(s, "{y:.16e},{u:.16e}");
    }
    write_atomic(path, &s)
}

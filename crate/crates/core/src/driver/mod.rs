//! Scenario setup, the `run` pipeline with its manifest, and the named
//! verification suites.

mod config;
mod suites;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;

use crate::assembly::{
    vector_field, Assembler, BoundaryCondition, DiscreteState, Discretization, ProblemSetup,
};
use crate::error::{Error, Result};
use crate::mesh::{
    generate_rectangle, import_gmsh, refine_uniform, BoundaryMarker, GmshMarkerMap, MarkerScheme,
    SplitKind, Triangulation,
};
use crate::postprocess::{
    constitutive_scatter, distance_to_marker, divergence_ratio, enstrophy_fraction, extract_slice,
    scatter_identity_defect, write_atomic, write_scatter_csv, write_slices_csv, write_vtk,
    FieldSnapshot, PointLocator, SliceProfile, SLICE_SAMPLES, SLICE_STATIONS,
};
use crate::solver::{set_deterministic, solve_from_stokes, ContinuationReport, ContinuationStage};
use crate::verification::{
    pressure_l2_error, stress_l2_error, ChannelCase, ChannelOracle, ManufacturedCase,
};

pub use config::{
    parse_entries, Entry, Origin, Scenario, ScenarioConfig, Schedule, DEFAULT_AIRFOIL_MESH, KEYS,
};
pub use suites::{verify, AirfoilStudy, Check, SuiteReport, SUITES};

/// Channel length used by the channel scenario.
pub const CHANNEL_LENGTH: f64 = 5.0;
/// Half-width of the slice window and of the wake strip, and the distance
/// from the airfoil that counts as near-wall.
pub const AIRFOIL_BAND: f64 = 0.5;
pub const SLICE_WINDOW: (f64, f64) = (-1.0, 1.0);

fn required_markers(s: Scenario) -> &'static [BoundaryMarker] {
    match s {
        Scenario::ManufacturedStokes | Scenario::Cavity => &[BoundaryMarker::Wall],
        Scenario::Channel => &[
            BoundaryMarker::Inflow,
            BoundaryMarker::Outflow,
            BoundaryMarker::Wall,
        ],
        Scenario::Airfoil => &[
            BoundaryMarker::Inflow,
            BoundaryMarker::Outflow,
            BoundaryMarker::Obstacle,
        ],
    }
}

fn channel_case(cfg: &ScenarioConfig) -> ChannelCase {
    let mut case = ChannelCase::new(cfg.params);
    case.length = CHANNEL_LENGTH;
    case.oracle = ChannelOracle::new(cfg.pressure_drop / CHANNEL_LENGTH, 1.0, cfg.params);
    case
}

/// Base mesh (generated or read) refined `cfg.refine` times.
pub fn build_mesh(cfg: &ScenarioConfig) -> Result<Triangulation> {
    let mut mesh = match (&cfg.mesh, cfg.scenario) {
        (Some(path), _) => import_gmsh(path, &GmshMarkerMap::default())?,
        (None, Scenario::ManufacturedStokes) => generate_rectangle(
            8,
            8,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall,
        )?,
        (None, Scenario::Cavity) => generate_rectangle(
            8,
            8,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Crossed,
            MarkerScheme::AllWall,
        )?,
        (None, Scenario::Channel) => channel_case(cfg).base_mesh()?,
        (None, Scenario::Airfoil) => import_gmsh(DEFAULT_AIRFOIL_MESH, &GmshMarkerMap::default())?,
    };
    for _ in 0..cfg.refine {
        mesh = refine_uniform(&mesh);
    }
    let counts = mesh.marker_counts();
    for m in required_markers(cfg.scenario) {
        if !counts.contains_key(m) {
            return Err(Error::InvalidMesh(format!(
                "scenario {} needs boundary marker {}",
                cfg.scenario,
                m.name()
            )));
        }
    }
    Ok(mesh)
}

pub fn problem_setup(cfg: &ScenarioConfig) -> ProblemSetup {
    let mut setup = match cfg.scenario {
        Scenario::ManufacturedStokes => ManufacturedCase {
            params: cfg.params,
            amplitude: 1.0,
        }
        .problem_setup(),
        Scenario::Channel => channel_case(cfg).problem_setup(),
        Scenario::Cavity => {
            let lid = cfg.inflow_speed;
            ProblemSetup::new(cfg.params).with_condition(
                BoundaryMarker::Wall,
                BoundaryCondition::Dirichlet(vector_field(move |x| {
                    if x[1] >= 1.0 {
                        [lid, 0.0]
                    } else {
                        [0.0, 0.0]
                    }
                })),
            )
        }
        Scenario::Airfoil => {
            let u = cfg.inflow_speed;
            ProblemSetup::new(cfg.params)
                .with_condition(
                    BoundaryMarker::Inflow,
                    BoundaryCondition::Dirichlet(vector_field(move |_| [u, 0.0])),
                )
                .with_condition(
                    BoundaryMarker::Obstacle,
                    BoundaryCondition::Dirichlet(vector_field(|_| [0.0, 0.0])),
                )
                .with_condition(
                    BoundaryMarker::Outflow,
                    BoundaryCondition::Traction {
                        pressure: -cfg.pressure_drop,
                    },
                )
        }
    };
    setup.params = cfg.params;
    setup.delta = cfg.delta;
    setup.gamma = cfg.gamma;
    setup.convective_flux = cfg.convective_flux;
    setup
}

/// A converged scenario.
pub struct Solved {
    pub config: ScenarioConfig,
    pub asm: Assembler,
    pub state: DiscreteState,
    pub report: ContinuationReport,
    pub timings: Vec<(&'static str, f64)>,
}

/// Builds and solves a scenario: Stokes start, then the continuation path.
pub fn solve(cfg: &ScenarioConfig) -> Result<Solved> {
    cfg.validate()?;
    if cfg.deterministic {
        set_deterministic(true);
    }
    let mut timings = Vec::new();
    let t = Instant::now();
    let mesh = Arc::new(build_mesh(cfg)?);
    timings.push(("mesh", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let disc = Arc::new(Discretization::new(mesh));
    let mut asm = Assembler::new(disc, problem_setup(cfg))?;
    let mut state = asm.initial_state();
    timings.push(("setup", t.elapsed().as_secs_f64()));
    info!(
        "{}: {} cells, {} dofs",
        cfg.scenario,
        asm.disc.mesh.num_cells(),
        asm.layout().len()
    );
    let t = Instant::now();
    let report = solve_from_stokes(&mut asm, &mut state, &cfg.newton_config())?;
    timings.push(("solve", t.elapsed().as_secs_f64()));
    Ok(Solved {
        config: cfg.clone(),
        asm,
        state,
        report,
        timings,
    })
}

/// Cells near the airfoil surface or inside the wake strip behind it.
pub fn airfoil_region(mesh: &Triangulation) -> impl Fn([f64; 2]) -> bool + '_ {
    let te = mesh
        .facets()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_boundary() && f.marker == BoundaryMarker::Obstacle)
        .flat_map(|(i, _)| mesh.facet_points(i))
        .fold(
            [f64::NEG_INFINITY, 0.0],
            |a, p| if p[0] > a[0] { p } else { a },
        );
    move |x| {
        (x[0] >= te[0] && (x[1] - te[1]).abs() <= AIRFOIL_BAND)
            || distance_to_marker(mesh, BoundaryMarker::Obstacle, x) <= AIRFOIL_BAND
    }
}

pub fn airfoil_slices(solved: &Solved) -> Result<Vec<SliceProfile>> {
    let disc = &solved.asm.disc;
    let loc = PointLocator::new(&disc.mesh);
    SLICE_STATIONS
        .iter()
        .map(|&x| {
            extract_slice(
                &disc.velocity,
                &loc,
                solved.state.v(),
                x,
                SLICE_WINDOW,
                SLICE_SAMPLES,
            )
        })
        .collect()
}

impl Solved {
    /// Scalar diagnostics recorded in the manifest.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let asm = &self.asm;
        let disc = &asm.disc;
        let x = &self.state.x;
        let mut m = vec![
            (
                "divergence_ratio".to_string(),
                divergence_ratio(&disc.velocity, self.state.v()),
            ),
            (
                "scatter_defect".to_string(),
                scatter_identity_defect(&constitutive_scatter(asm, x), &asm.setup.params),
            ),
        ];
        let l = asm.layout();
        match self.config.scenario {
            Scenario::ManufacturedStokes => {
                let case = ManufacturedCase {
                    params: self.config.params,
                    amplitude: 1.0,
                };
                m.push((
                    "velocity_l2_error".into(),
                    disc.velocity.l2_error(self.state.v(), |y| case.velocity(y)),
                ));
                m.push((
                    "stress_l2_error".into(),
                    stress_l2_error(disc, &x[l.stress_range()], |y| {
                        case.stress(y)
                            .unwrap_or(crate::tensor::SymTensor2::new(f64::NAN, f64::NAN))
                    }),
                ));
                m.push((
                    "pressure_l2_error".into(),
                    pressure_l2_error(disc, self.state.p(), |y| case.pressure(y)),
                ));
            }
            Scenario::Channel => {
                let o = channel_case(&self.config).oracle;
                m.push((
                    "velocity_l2_error".into(),
                    disc.velocity
                        .l2_error(self.state.v(), |y| [o.exact(y[1]), 0.0]),
                ));
            }
            Scenario::Airfoil => {
                let w = crate::postprocess::compute_vorticity(&disc.velocity, self.state.v());
                m.push((
                    "enstrophy_fraction".into(),
                    enstrophy_fraction(&disc.mesh, &w, airfoil_region(&disc.mesh)),
                ));
            }
            Scenario::Cavity => {}
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub stage: ContinuationStage,
    pub iterations: usize,
    pub final_residual: f64,
    pub krylov_iterations: usize,
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub version: &'static str,
    pub cells: usize,
    pub dofs: usize,
    pub stages: Vec<StageSummary>,
    pub metrics: Vec<(String, f64)>,
    pub timings: Vec<(&'static str, f64)>,
    pub outputs: Vec<PathBuf>,
    pub path: PathBuf,
}

impl RunManifest {
    pub fn total_newton_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    /// The resolved configuration as plain settings and everything else as
    /// comments, so the manifest itself parses as a configuration file.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# actflow run manifest\n");
        let _ = writeln!(s, "# version = {}", self.version);
        s.push_str(&self.config.to_text());
        let _ = writeln!(s, "# cells = {}", self.cells);
        let _ = writeln!(s, "# dofs = {}", self.dofs);
        let _ = writeln!(
            s,
            "# newton_iterations = {}",
            self.total_newton_iterations()
        );
        for (i, st) in self.stages.iter().enumerate() {
            let _ = writeln!(
                s,
                "# stage {i}: eps = {}, eu = {}, re = {}, iterations = {}, residual = {:e}, krylov = {}",
                st.stage.eps, st.stage.eu, st.stage.re, st.iterations, st.final_residual, st.krylov_iterations
            );
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "# {k} = {v:e}");
        }
        for (k, v) in &self.timings {
            let _ = writeln!(s, "# time_{k} = {v:.3}");
        }
        for p in &self.outputs {
            let _ = writeln!(s, "# output = {}", p.display());
        }
        s
    }
}

/// `<scenario>_<refine>_<Eu>`.
pub fn output_stem(cfg: &ScenarioConfig) -> String {
    format!("{}_{}_{}", cfg.scenario, cfg.refine, cfg.params.eu)
}

/// Solves, exports VTK and CSV files into `cfg.out`, and writes the manifest
/// last.
pub fn run(cfg: &ScenarioConfig) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut solved = solve(cfg)?;
    let t = Instant::now();
    let stem = output_stem(cfg);
    let path = |suffix: &str| cfg.out.join(format!("{stem}{suffix}"));
    let snap = FieldSnapshot::new(&solved.asm, &solved.state.x)?;
    let mut outputs = Vec::new();
    let vtk = path(".vtk");
    write_vtk(
        &snap,
        &format!("{} Eu={} Re={}", cfg.scenario, cfg.params.eu, cfg.params.re),
        &vtk,
    )?;
    outputs.push(vtk);
    let csv = path(".csv");
    write_scatter_csv(&constitutive_scatter(&solved.asm, &solved.state.x), &csv)?;
    outputs.push(csv);
    if cfg.scenario == Scenario::Airfoil {
        let slices = path("_slices.csv");
        write_slices_csv(&airfoil_slices(&solved)?, &slices)?;
        outputs.push(slices);
    }
    let metrics = solved.metrics();
    solved.timings.push(("output", t.elapsed().as_secs_f64()));
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        cells: solved.asm.disc.mesh.num_cells(),
        dofs: solved.asm.layout().len(),
        stages: solved
            .report
            .stages
            .iter()
            .map(|(stage, r)| StageSummary {
                stage: *stage,
                iterations: r.iterations,
                final_residual: r.final_residual(),
                krylov_iterations: r.total_krylov(),
            })
            .collect(),
        metrics,
        timings: solved.timings,
        outputs,
        path: path("_manifest.txt"),
    };
    write_atomic(&manifest.path, &manifest.to_text())?;
    Ok(manifest)
}

/// Reads a configuration file and applies `overrides` after it.
pub fn load_config(path: Option<&Path>, overrides: &[Entry]) -> Result<ScenarioConfig> {
    let mut entries = match path {
        Some(p) => parse_entries(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => Vec::new(),
    };
    entries.extend_from_slice(overrides);
    ScenarioConfig::from_entries(&entries)
}

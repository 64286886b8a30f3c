use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::solver::{
    ContinuationStage, Forcing, KrylovConfig, LineSearch, LinearSolver, NewtonConfig, SchurApprox,
    TopBlockSolve,
};

/// The checked-in airfoil mesh.
pub const DEFAULT_AIRFOIL_MESH: &str =
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../meshes/naca0012.msh");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    /// Taylor-Green velocity on the unit square with a balancing body force.
    ManufacturedStokes,
    /// Fully developed flow in `(0, 5) x (-1, 1)`.
    Channel,
    /// Lid-driven unit square.
    Cavity,
    /// Symmetric airfoil in the square `(-8, 8)^2`.
    Airfoil,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::ManufacturedStokes,
        Scenario::Channel,
        Scenario::Cavity,
        Scenario::Airfoil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ManufacturedStokes => "manufactured-stokes",
            Scenario::Channel => "channel",
            Scenario::Cavity => "cavity",
            Scenario::Airfoil => "airfoil",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected one of manufactured-stokes, channel, cavity, airfoil)"))
    }
}

/// Continuation path: scenario default or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Auto,
    Explicit(Vec<ContinuationStage>),
}

/// Everything a run needs. Defaults depend on the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Gmsh file. `None` uses the scenario's generated mesh, or the
    /// checked-in mesh for the airfoil.
    pub mesh: Option<PathBuf>,
    pub refine: usize,
    pub params: ConstitutiveParams,
    pub delta: f64,
    pub gamma: f64,
    /// Far-field speed (airfoil) or lid speed (cavity).
    pub inflow_speed: f64,
    /// Outlet pressure is `-pressure_drop` (airfoil). For the channel it sets
    /// the driving gradient `pressure_drop / length`.
    pub pressure_drop: f64,
    /// Upwind facet term for the convection; off gives the volume term only.
    pub convective_flux: bool,
    pub newton: NewtonConfig,
    pub schedule: Schedule,
    pub out: PathBuf,
    pub deterministic: bool,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let (params, gamma, inflow_speed) = match scenario {
            Scenario::ManufacturedStokes => {
                (ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0), 1e4, 1.0)
            }
            Scenario::Channel => (ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0), 0.0, 1.0),
            Scenario::Cavity => (
                ConstitutiveParams::new(1.0, 0.0, 1e-3, 100.0, 0.0),
                1e4,
                1.0,
            ),
            Scenario::Airfoil => (
                ConstitutiveParams::new(1.0, 15.0, 1e-3, 500.0, 0.0),
                1e4,
                10.0,
            ),
        };
        Self {
            scenario,
            mesh: (scenario == Scenario::Airfoil).then(|| PathBuf::from(DEFAULT_AIRFOIL_MESH)),
            refine: 0,
            params,
            delta: 10.0,
            gamma,
            inflow_speed,
            pressure_drop: 5.0,
            convective_flux: true,
            newton: NewtonConfig::default(),
            schedule: Schedule::Auto,
            out: PathBuf::from("out"),
            deterministic: false,
        }
    }

    /// Scenario default path: for activated fluids on the generated square
    /// domains, `eps` decreases through 0.1, 0.01, 0.001; then `Re` rises
    /// through 50 and 200. Every stage not harder than the target is kept.
    pub fn resolved_schedule(&self) -> Vec<ContinuationStage> {
        if let Schedule::Explicit(s) = &self.schedule {
            return s.clone();
        }
        let t = self.params;
        let re_path: Vec<f64> = [50.0, 200.0]
            .into_iter()
            .filter(|&r| r < t.re)
            .chain([t.re])
            .collect();
        let mut out = Vec::new();
        if t.eu > 0.0
            && matches!(
                self.scenario,
                Scenario::Channel | Scenario::ManufacturedStokes
            )
        {
            for eps in [0.1, 0.01, 0.001].into_iter().filter(|&e| e > t.eps) {
                out.push(ContinuationStage {
                    eps,
                    eu: t.eu,
                    re: re_path[0],
                });
            }
        }
        out.extend(re_path.iter().map(|&re| ContinuationStage {
            eps: t.eps,
            eu: t.eu,
            re,
        }));
        out
    }

    pub fn newton_config(&self) -> NewtonConfig {
        NewtonConfig {
            schedule: self.resolved_schedule(),
            ..self.newton.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !self.inflow_speed.is_finite() || !self.pressure_drop.is_finite() {
            return Err(Error::InvalidParameter(
                "inflow_speed and pressure_drop must be finite".into(),
            ));
        }
        let cfg = self.newton_config();
        cfg.validate()?;
        if cfg.schedule.last() != Some(&ContinuationStage::of(&self.params)) {
            return Err(Error::InvalidParameter(
                "continuation must end at the target eps, eu, re".into(),
            ));
        }
        Ok(())
    }

    /// Flat `key = value` text that parses back to the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.to_string());
        kv(
            "mesh",
            self.mesh
                .as_ref()
                .map_or("generated".into(), |p| p.display().to_string()),
        );
        kv("refine", self.refine.to_string());
        kv("alpha", self.params.alpha.to_string());
        kv("eu", self.params.eu.to_string());
        kv("eps", self.params.eps.to_string());
        kv("re", self.params.re.to_string());
        kv("ga", self.params.ga.to_string());
        kv("delta", self.delta.to_string());
        kv("gamma", self.gamma.to_string());
        kv("inflow_speed", self.inflow_speed.to_string());
        kv("pressure_drop", self.pressure_drop.to_string());
        kv("convective_flux", self.convective_flux.to_string());
        let n = &self.newton;
        kv("newton_abs_tol", n.abs_tol.to_string());
        kv("newton_rel_tol", n.rel_tol.to_string());
        kv("newton_max_iterations", n.max_iterations.to_string());
        kv(
            "line_search",
            match n.line_search {
                LineSearch::Backtracking => "backtracking",
                LineSearch::FullStep => "full",
            }
            .into(),
        );
        let (name, k, schur) = match n.linear {
            LinearSolver::Auto(k) => ("auto", k, SchurApprox::ScaledMass),
            LinearSolver::Direct => ("direct", KrylovConfig::default(), SchurApprox::ScaledMass),
            LinearSolver::Krylov { config, schur } => ("krylov", config, schur),
        };
        kv("linear_solver", name.into());
        kv(
            "schur",
            match schur {
                SchurApprox::ScaledMass => "mass",
                SchurApprox::ExactDense => "exact",
            }
            .into(),
        );
        kv("krylov_tol", k.tol.to_string());
        kv("krylov_restart", k.restart.to_string());
        kv("krylov_max_iterations", k.max_iterations.to_string());
        kv(
            "forcing",
            match n.forcing {
                Forcing::Fixed => "fixed",
                Forcing::EisenstatWalker => "eisenstat-walker",
            }
            .into(),
        );
        kv("local_stress_update", n.local_stress_update.to_string());
        kv("divergence_correction", n.divergence_correction.to_string());
        let stages: Vec<String> = self
            .resolved_schedule()
            .iter()
            .map(|c| format!("{}:{}:{}", c.eps, c.eu, c.re))
            .collect();
        kv("continuation", stages.join(", "));
        kv("out", self.out.display().to_string());
        kv("deterministic", self.deterministic.to_string());
        s
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub origin: Origin,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn flag(key: &str, value: impl Into<String>) -> Self {
        Self {
            origin: Origin::Flag,
            key: key.replace('-', "_"),
            value: value.into(),
        }
    }

    fn error(&self, message: String) -> Error {
        match self.origin {
            Origin::Line(line) => Error::Config { line, message },
            Origin::Flag => {
                Error::InvalidParameter(format!("--{}: {message}", self.key.replace('_', "-")))
            }
        }
    }
}

/// Splits `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Config {
            line: i + 1,
            message: m,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(bad("empty key".into()));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            let Origin::Line(p) = prev.origin else {
                unreachable!()
            };
            return Err(bad(format!(
                "duplicate key `{key}` (first set on line {p})"
            )));
        }
        out.push(Entry {
            origin: Origin::Line(i + 1),
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse `{v}` as a number"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn stages(v: &str) -> std::result::Result<Schedule, String> {
    if v == "auto" {
        return Ok(Schedule::Auto);
    }
    v.split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let f: Vec<&str> = s.split(':').map(str::trim).collect();
            if f.len() != 3 {
                return Err(format!("continuation stage `{s}` must be eps:eu:re"));
            }
            Ok(ContinuationStage {
                eps: num(f[0])?,
                eu: num(f[1])?,
                re: num(f[2])?,
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Schedule::Explicit)
}

/// Keys accepted in files and as `--key` overrides.
pub const KEYS: [&str; 28] = [
    "scenario",
    "mesh",
    "refine",
    "alpha",
    "eu",
    "eps",
    "re",
    "ga",
    "delta",
    "gamma",
    "inflow_speed",
    "pressure_drop",
    "convective_flux",
    "newton_abs_tol",
    "newton_rel_tol",
    "newton_max_iterations",
    "line_search",
    "linear_solver",
    "schur",
    "krylov_tol",
    "krylov_restart",
    "krylov_max_iterations",
    "forcing",
    "local_stress_update",
    "divergence_correction",
    "continuation",
    "out",
    "deterministic",
];

impl ScenarioConfig {
    /// Builds a configuration from entries in order. The last `scenario`
    /// entry picks the defaults; the other entries then apply in order, so
    /// later ones (command-line overrides) win.
    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let mut scenario = Scenario::Airfoil;
        for e in entries.iter().filter(|e| e.key == "scenario") {
            scenario = e.value.parse().map_err(|m| e.error(m))?;
        }
        let mut cfg = Self::defaults(scenario);
        // krylov settings are collected first so the solver kind can use them
        let mut linear = "auto".to_string();
        let mut schur = SchurApprox::ScaledMass;
        let mut kry = KrylovConfig::default();
        for e in entries {
            let v = e.value.as_str();
            let r: std::result::Result<(), String> = (|| {
                match e.key.as_str() {
                    "scenario" => {}
                    "mesh" => cfg.mesh = (v != "generated").then(|| PathBuf::from(v)),
                    "refine" => cfg.refine = num(v)?,
                    "alpha" => cfg.params.alpha = num(v)?,
                    "eu" => cfg.params.eu = num(v)?,
                    "eps" => cfg.params.eps = num(v)?,
                    "re" => cfg.params.re = num(v)?,
                    "ga" => cfg.params.ga = num(v)?,
                    "delta" => cfg.delta = num(v)?,
                    "gamma" => cfg.gamma = num(v)?,
                    "inflow_speed" => cfg.inflow_speed = num(v)?,
                    "pressure_drop" => cfg.pressure_drop = num(v)?,
                    "convective_flux" => cfg.convective_flux = flag(v)?,
                    "newton_abs_tol" => cfg.newton.abs_tol = num(v)?,
                    "newton_rel_tol" => cfg.newton.rel_tol = num(v)?,
                    "newton_max_iterations" => cfg.newton.max_iterations = num(v)?,
                    "line_search" => {
                        cfg.newton.line_search = match v {
                            "backtracking" => LineSearch::Backtracking,
                            "full" => LineSearch::FullStep,
                            _ => {
                                return Err(format!(
                                    "line_search must be backtracking or full, got `{v}`"
                                ))
                            }
                        }
                    }
                    "linear_solver" => {
                        if !matches!(v, "auto" | "direct" | "krylov") {
                            return Err(format!(
                                "linear_solver must be auto, direct or krylov, got `{v}`"
                            ));
                        }
                        linear = v.to_string();
                    }
                    "schur" => {
                        schur = match v {
                            "mass" => SchurApprox::ScaledMass,
                            "exact" => SchurApprox::ExactDense,
                            _ => return Err(format!("schur must be mass or exact, got `{v}`")),
                        }
                    }
                    "krylov_tol" => kry.tol = num(v)?,
                    "krylov_restart" => kry.restart = num(v)?,
                    "krylov_max_iterations" => kry.max_iterations = num(v)?,
                    "forcing" => {
                        cfg.newton.forcing = match v {
                            "fixed" => Forcing::Fixed,
                            "eisenstat-walker" => Forcing::EisenstatWalker,
                            _ => {
                                return Err(format!(
                                    "forcing must be fixed or eisenstat-walker, got `{v}`"
                                ))
                            }
                        }
                    }
                    "local_stress_update" => cfg.newton.local_stress_update = flag(v)?,
                    "divergence_correction" => cfg.newton.divergence_correction = flag(v)?,
                    "continuation" => cfg.schedule = stages(v)?,
                    "out" => cfg.out = PathBuf::from(v),
                    "deterministic" => cfg.deterministic = flag(v)?,
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            })();
            r.map_err(|m| e.error(m))?;
        }
        kry.top_solve = TopBlockSolve::Direct;
        cfg.newton.linear = match linear.as_str() {
            "direct" => LinearSolver::Direct,
            "krylov" => LinearSolver::Krylov { config: kry, schur },
            _ => LinearSolver::Auto(kry),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(&parse_entries(text)?)
    }
}

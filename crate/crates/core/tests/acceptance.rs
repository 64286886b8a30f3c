//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails. Individual sub-checks go to stderr.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use actflow_core::driver::{self, verify, AirfoilStudy, Check, Scenario, ScenarioConfig, Solved};
use actflow_core::error::{Error, Result};

type Outcome = std::result::Result<Vec<Check>, Box<dyn std::error::Error>>;

/// Pointwise divergence relative to the largest vertex speed.
const DIVERGENCE_TOL: f64 = 1e-10;
/// Relative max-norm field difference between gamma = 0 and gamma = 1e4.
const AL_INVARIANCE_TOL: f64 = 1e-8;

struct Criterion {
    id: &'static str,
    title: &'static str,
    checks: Vec<Check>,
    seconds: f64,
}

impl Criterion {
    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let detail = if self.checks.is_empty() {
            "no checks ran".to_string()
        } else if failed.is_empty() {
            format!("{} checks", self.checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        format!(
            "{} {} {} ({detail}; {:.1}s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        )
    }
}

fn criterion(id: &'static str, title: &'static str, f: impl FnOnce() -> Outcome) -> Criterion {
    let t = Instant::now();
    let checks = f().unwrap_or_else(|e| vec![Check::flag("error", false, e.to_string(), "no error")]);
    for c in &checks {
        eprintln!("  [{id}] {c}");
    }
    Criterion {
        id,
        title,
        checks,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn suite(name: &str) -> Outcome {
    Ok(verify(name)?.checks)
}

fn metric(s: &Solved, key: &str) -> f64 {
    s.metrics().into_iter().find(|(k, _)| k == key).map_or(f64::NAN, |(_, v)| v)
}

fn divergence_check(name: String, s: &Solved) -> Check {
    Check::at_most(name, metric(s, "divergence_ratio"), DIVERGENCE_TOL)
}

fn scenario(s: Scenario, edit: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::defaults(s);
    edit(&mut cfg);
    cfg
}

/// Largest field difference relative to the field's max norm, per block.
fn field_differences(a: &Solved, b: &Solved) -> Vec<(&'static str, f64)> {
    let l = a.asm.layout();
    [("stress", l.stress_range()), ("velocity", l.velocity_range()), ("pressure", l.pressure_range())]
        .into_iter()
        .map(|(name, r)| {
            let (x, y) = (&a.state.x[r.clone()], &b.state.x[r]);
            let diff = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let scale = y.iter().map(|q| q.abs()).fold(0.0, f64::max);
            (name, if scale > 0.0 { diff / scale } else { diff })
        })
        .collect()
}

/// Runs `cfg` twice into fresh directories and compares every CSV byte for
/// byte, plus the Newton iteration counts.
fn determinism_checks(tag: &str, cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut runs = Vec::new();
    for d in &dirs {
        let mut c = cfg.clone();
        c.out = d.path().to_path_buf();
        c.deterministic = true;
        let m = driver::run(&c)?;
        let mut csv = Vec::new();
        for p in m.outputs.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
            csv.push(fs::read(p).map_err(|e| Error::io(p, e))?);
        }
        runs.push((m.total_newton_iterations(), csv));
    }
    let same = runs[0] == runs[1] && !runs[0].1.is_empty();
    Ok(vec![Check::flag(
        format!("{tag}_identical_csv"),
        same,
        format!("{} files, {} vs {} Newton steps", runs[0].1.len(), runs[0].0, runs[1].0),
        "byte-identical",
    )])
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut out = Vec::new();

    out.push(criterion("1", "constitutive duality, tangent and monotonicity", || suite("constitutive")));

    // one airfoil study serves criteria 2, 6 and 7
    let t = Instant::now();
    let airfoil = AirfoilStudy::run(0, 1e4);
    let airfoil_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let airfoil_gamma0 = driver::solve(&scenario(Scenario::Airfoil, |c| {
        c.gamma = 0.0;
        c.deterministic = true;
    }));
    let gamma0_seconds = t.elapsed().as_secs_f64();

    let mut c2 = criterion("2", "pointwise incompressibility on every converged scenario", || {
        let mut checks = Vec::new();
        let runs = [
            ("manufactured-stokes", scenario(Scenario::ManufacturedStokes, |_| {})),
            ("channel_eu0", scenario(Scenario::Channel, |_| {})),
            ("channel_eu15", scenario(Scenario::Channel, |c| c.params.eu = 15.0)),
            ("cavity_re100", scenario(Scenario::Cavity, |_| {})),
        ];
        for (tag, cfg) in runs {
            checks.push(divergence_check(format!("{tag}.divergence_ratio"), &driver::solve(&cfg)?));
        }
        let study = airfoil.as_ref().map_err(|e| e.to_string())?;
        checks.push(divergence_check("airfoil_eu0.divergence_ratio".into(), &study.newtonian));
        checks.push(divergence_check("airfoil_eu15.divergence_ratio".into(), &study.activated));
        let g0 = airfoil_gamma0.as_ref().map_err(|e| e.to_string())?;
        checks.push(divergence_check("airfoil_eu15_gamma0.divergence_ratio".into(), g0));
        Ok(checks)
    });
    c2.seconds += airfoil_seconds + gamma0_seconds;
    out.push(c2);

    out.push(criterion("3", "channel flow against the quadrature oracle", || suite("channel-oracle")));
    out.push(criterion("4", "manufactured Stokes convergence orders", || suite("convergence")));
    out.push(criterion("5", "augmented-Lagrangian preconditioner robustness", || suite("preconditioner")));

    out.push(criterion("6", "airfoil fields independent of the grad-div weight", || {
        let study = airfoil.as_ref().map_err(|e| e.to_string())?;
        let g0 = airfoil_gamma0.as_ref().map_err(|e| e.to_string())?;
        Ok(field_differences(&study.activated, g0)
            .into_iter()
            .map(|(name, d)| Check::at_most(format!("{name}_relative_max_difference"), d, AL_INVARIANCE_TOL))
            .collect())
    }));

    out.push(criterion("7", "airfoil desk experiment (scatter, slices, enstrophy, golden)", || {
        Ok(airfoil.as_ref().map_err(|e| e.to_string())?.checks()?)
    }));

    out.push(criterion("8", "deterministic runs are byte-identical", || {
        let mut checks = determinism_checks("cavity_re100_krylov", &scenario(Scenario::Cavity, |_| {}))?;
        checks.extend(determinism_checks("channel_eu15", &scenario(Scenario::Channel, |c| c.params.eu = 15.0))?);
        Ok(checks)
    }));

    println!();
    for c in &out {
        println!("{}", c.line());
    }
    let passed = out.iter().filter(|c| c.passed()).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1}s", out.len(), t0.elapsed().as_secs_f64());
    if passed == out.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

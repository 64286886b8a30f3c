use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use actflow_core::driver::{self, Entry, SUITES};
use actflow_core::error::Error;

/// Thread count for the assembly and factorization pools.
const THREADS_VAR: &str = "ACTFLOW_THREADS";

#[derive(Parser)]
#[command(name = "actflow", version, about = "Activated-fluid flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write VTK, CSV and a run manifest.
    Run(Box<RunArgs>),
    /// Run a named verification suite and print PASS/FAIL lines.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines.
    config: Option<PathBuf>,
    /// manufactured-stokes, channel, cavity or airfoil.
    #[arg(long)]
    scenario: Option<String>,
    /// Gmsh 2.2 file, or `generated`.
    #[arg(long)]
    mesh: Option<String>,
    /// Uniform refinements of the base mesh.
    #[arg(long)]
    refine: Option<String>,
    /// Reynolds number.
    #[arg(long)]
    re: Option<String>,
    /// Activation (Euler) number.
    #[arg(long)]
    eu: Option<String>,
    /// Regularization of the activation law.
    #[arg(long)]
    eps: Option<String>,
    /// Grad-div weight.
    #[arg(long)]
    gamma: Option<String>,
    /// Interior penalty weight.
    #[arg(long)]
    delta: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Sequential kernels; repeated runs give identical files.
    #[arg(long)]
    deterministic: bool,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<Entry>, Error> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("--set expects KEY=VALUE, got `{s}`")))?;
            out.push(Entry::flag(k.trim(), v.trim()));
        }
        let named = [
            ("scenario", &self.scenario),
            ("mesh", &self.mesh),
            ("refine", &self.refine),
            ("re", &self.re),
            ("eu", &self.eu),
            ("eps", &self.eps),
            ("gamma", &self.gamma),
            ("delta", &self.delta),
            ("out", &self.out),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                out.push(Entry::flag(k, v.as_str()));
            }
        }
        if self.deterministic {
            out.push(Entry::flag("deterministic", "true"));
        }
        Ok(out)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter(_)
        | Error::MissingBoundaryCondition(_)
        | Error::UnknownSuite(_)
        | Error::MeshParse { .. }
        | Error::InvalidMesh(_)
        | Error::IncompatibleFlux { .. } => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{THREADS_VAR} must be positive")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let cfg = driver::load_config(args.config.as_deref(), &args.overrides()?)?;
    let m = driver::run(&cfg)?;
    println!("scenario {} cells {} dofs {} newton {}", cfg.scenario, m.cells, m.dofs, m.total_newton_iterations());
    for (k, v) in &m.metrics {
        println!("{k} {v:e}");
    }
    for p in m.outputs.iter().chain([&m.path]) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Verify { suite } => driver::verify(suite).map(|r| {
            print!("{r}");
            r.passed()
        }),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use clap::{Args, Parser, Subcommand, ValueEnum};
use fsispectra::config::Config;
use fsispectra::evolution::Scheme;
use fsispectra::mesh::GeometryKind;
use fsispectra::pipeline::{self, Command, EvolveArgs, Init, SpectrumArgs};
use fsispectra::pressure::PressureBc;
use fsispectra::spectrum::parse_grid;
use fsispectra::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fsispectra", version, about = "Spectral verification toolkit for a Stokes fluid coupled to a layered elastic structure")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    geometry: Option<GeometryKind>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Load this mesh file instead of generating one.
    #[arg(long, global = true)]
    mesh_file: Option<PathBuf>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Boundary condition on the interface for pressure reconstruction.
    #[arg(long, global = true)]
    pressure_bc: Option<PressureBc>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate (or load) and validate the mesh.
    Mesh,
    /// Assemble the energy Gram matrix and the generator; export triplet files.
    Assemble,
    /// Build the kernel vector and compare it with the eigensolver.
    Nullspace {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Eigenvalues of the generator and resolvent norms along the imaginary axis.
    Spectrum {
        #[arg(long)]
        n_eigs: Option<usize>,
        /// Shift `re,im` for shift-invert Arnoldi.
        #[arg(long, value_parser = parse_shift)]
        shift: Option<(f64, f64)>,
        #[arg(long)]
        dense: bool,
        /// Resolvent scan grid `min:max:steps` on the kernel complement.
        #[arg(long, value_parser = |s: &str| parse_grid(s).map(Grid))]
        scan: Option<Grid>,
    },
    /// Traction defects of clamped Lame eigenmodes.
    CheckAssumption {
        #[arg(long, default_value_t = 10)]
        modes: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve `A x = x*` on the kernel complement.
    Resolvent {
        /// Right-hand side as a state file; a seeded random state is used otherwise.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Time integration with energy tracking.
    Evolve {
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long, value_enum, default_value_t = InitKind::Random)]
        init: InitKind,
        /// State file for `--init file`.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        project_initial: bool,
        #[arg(long)]
        samples: Option<usize>,
        /// Write full states every this many steps.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run the eight-check verification suite.
    Verify,
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InitKind {
    Random,
    Pluck,
    File,
}

fn parse_shift(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad shift component '{t}'"));
    match parts.as_slice() {
        [re] => Ok((num(re)?, 0.0)),
        [re, im] => Ok((num(re)?, num(im)?)),
        _ => Err(format!("shift '{s}' must be re or re,im")),
    }
}

fn build(cli: &Cli) -> Result<(Config, Command), Error> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(v) = &c.out {
        cfg.output.directory = v.clone();
    }
    if let Some(v) = c.geometry {
        cfg.geometry.kind = v;
    }
    if let Some(v) = c.resolution {
        cfg.geometry.resolution = v;
    }
    if let Some(v) = &c.mesh_file {
        cfg.geometry.mesh_file = Some(v.clone());
    }
    if let Some(v) = c.lambda {
        cfg.material.lambda = v;
    }
    if let Some(v) = c.mu {
        cfg.material.mu = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.pressure_bc {
        cfg.pressure.bc = v;
    }
    let cmd = match &cli.command {
        Cmd::Mesh => Command::Mesh,
        Cmd::Assemble => Command::Assemble,
        Cmd::Nullspace { alpha } => Command::Nullspace { alpha: *alpha },
        Cmd::Spectrum { n_eigs, shift, dense, scan } => Command::Spectrum(SpectrumArgs { n_eigs: *n_eigs, shift: *shift, dense: *dense, scan: scan.as_ref().map(|g| g.0.clone()) }),
        Cmd::CheckAssumption { modes, tol } => Command::CheckAssumption { modes: *modes, tol: *tol },
        Cmd::Resolvent { state } => Command::Resolvent { state: state.clone() },
        Cmd::Evolve { t_final, dt, scheme, init, state, project_initial, samples, snapshot_every } => {
            if let Some(v) = t_final {
                cfg.evolution.t_final = *v;
            }
            if let Some(v) = dt {
                cfg.evolution.dt = *v;
            }
            if let Some(v) = scheme {
                cfg.evolution.scheme = *v;
            }
            if let Some(v) = samples {
                cfg.evolution.samples = *v;
            }
            let init = match (init, state) {
                (InitKind::Random, _) => Init::Random,
                (InitKind::Pluck, _) => Init::Pluck,
                (InitKind::File, Some(p)) => Init::File(p.clone()),
                (InitKind::File, None) => return Err(Error::Config(vec!["--init file needs --state <path>".into()])),
            };
            Command::Evolve(EvolveArgs { init, project_initial: *project_initial, snapshot_every: *snapshot_every })
        }
        Cmd::Verify => Command::Verify,
    };
    cfg.validate()?;
    Ok((cfg, cmd))
}

/// Bad input of any kind is a usage error; numerical breakdowns count as failed checks.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Factorization(_) | Error::RankDeficient(_) | Error::Assembly(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, cmd) = match build(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run(&cfg, &cmd) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("{}: {} (outputs in {})", cmd.name(), outcome.manifest.status, cfg.output.directory.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cmd.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

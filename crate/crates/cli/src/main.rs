use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use shell_lab_cli::{commands, CliError, ConfigError, Options, RawConfig};

/// Experiments on thin elliptic shells: isometries, matching and bending limits.
#[derive(Parser, Debug)]
#[command(name = "shell-lab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set mesh.rings=32`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (key `output.dir`).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Mesh resolution (key `mesh.rings`).
    #[arg(long, global = true)]
    rings: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chart geometry, ellipticity check and mesh statistics.
    Geom {
        /// Write the mesh in the plain text dump format.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
    },
    /// Least-squares solve of sym∇w = B for a manufactured right-hand side.
    SolveSymgrad,
    /// Generate infinitesimal isometries from boundary modes.
    Isogen,
    /// Match an infinitesimal isometry to an exact one.
    Match {
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Shell energy of one recovery deformation.
    Energy {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Thickness (key `energy.h`).
        #[arg(long)]
        h: Option<String>,
    },
    /// Scaled shell energies against the bending limit over a list of thicknesses.
    GammaSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma separated, strictly decreasing (key `gamma.h_list`).
        #[arg(long)]
        h_list: Option<String>,
    },
    /// Optimal rotation and limit energy minimizer under a dead load.
    Loads {
        /// `axial`, `shear` or `file:PATH` (key `loads.force`).
        #[arg(long)]
        force_profile: Option<String>,
        /// Highest boundary frequency of the basis (key `loads.k_max`).
        #[arg(long)]
        modes: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
}

impl SweepArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("gamma.beta", &self.beta),
            ("iso.modes", &self.mode),
            ("material.mu", &self.mu),
            ("material.lambda", &self.lambda),
        ]
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Geom { .. } => "geom",
            Command::SolveSymgrad => "solve-symgrad",
            Command::Isogen => "isogen",
            Command::Match { .. } => "match",
            Command::Energy { .. } => "energy",
            Command::GammaSweep { .. } => "gamma-sweep",
            Command::Loads { .. } => "loads",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        match self {
            Command::Match { h, mode } => vec![("match.h", h), ("iso.modes", mode)],
            Command::Energy { sweep, h } => {
                let mut v = sweep.overrides();
                v.push(("energy.h", h));
                v
            }
            Command::GammaSweep { sweep, h_list } => {
                let mut v = sweep.overrides();
                v.push(("gamma.h_list", h_list));
                v
            }
            Command::Loads { force_profile, modes } => vec![("loads.force", force_profile), ("loads.k_max", modes)],
            _ => Vec::new(),
        }
    }
}

fn configure(cli: &Cli) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::defaults();
    if let Some(path) = &cli.global.config {
        raw.merge_file(path)?;
    }
    for kv in &cli.global.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError {
            key: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        raw.set(k.trim(), v.trim())?;
    }
    let flags = [("output.dir", &cli.global.out), ("mesh.rings", &cli.global.rings)];
    for (k, v) in flags.into_iter().chain(cli.command.overrides()) {
        if let Some(v) = v {
            raw.set(k, v)?;
        }
    }
    Ok(raw)
}

fn threads() -> Result<(), ConfigError> {
    let Ok(value) = std::env::var("SHELL_LAB_THREADS") else {
        return Ok(());
    };
    let bad = || ConfigError {
        key: "SHELL_LAB_THREADS".into(),
        message: format!("expected a positive integer, got '{value}'"),
    };
    let n: usize = value.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError {
            key: "SHELL_LAB_THREADS".into(),
            message: e.to_string(),
        })
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    threads()?;
    let raw = configure(cli)?;
    let cfg = raw.resolve()?;
    let opts = Options {
        dump_mesh: match &cli.command {
            Command::Geom { dump_mesh } => dump_mesh.clone(),
            _ => None,
        },
    };
    let name = cli.command.name();
    let start = Instant::now();
    let outcome = commands::run(name, &cfg, &opts);
    let elapsed = start.elapsed().as_secs_f64();
    let summary = match &outcome {
        Ok(v) => v.clone(),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    };
    commands::write_metadata(&cfg, name, raw.entries(), elapsed, &summary)?;
    outcome.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shell-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Subcommand implementations. Each writes its artifacts into the output
//! directory and returns a JSON summary for the run metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use shell_lab::energy::SweepTolerances;
use shell_lab::isospace::generate_mode;
use shell_lab::loads::LimitProblem;
use shell_lab::symgrad::{tensor_l2_norm, SymGradSolver};
use shell_lab::{
    check_ellipticity, gamma_sweep, rigid_augmented_basis, triangulate_disk, Error, FramedField,
    ForceSpec, GammaConfig, GammaRow, InfIsometry, Surface, SurfaceChart, Vec3,
};

use crate::config::{ConfigError, ForceSource, RunConfig, SymGradCase};

/// Failure of a run, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical { error: Error, artifacts: Vec<PathBuf> },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Numerical { error, .. } => write!(f, "numerical failure: {error}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError::Numerical {
            error,
            artifacts: Vec::new(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Full round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &Value) -> CliResult<PathBuf> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    write_file(dir, name, &(text + "\n"))
}

fn surface(cfg: &RunConfig) -> CliResult<Arc<Surface>> {
    Ok(Surface::build(cfg.chart.clone(), cfg.rings, cfg.order)?)
}

/// `x,y,vx,vy,vz` at the dofs of the scalar space.
fn field_csv(s: &Surface, v: &InfIsometry) -> String {
    let mut out = String::from("x,y,vx,vy,vz\n");
    for (dof, p) in s.space().dof_coords().iter().enumerate() {
        let c = v.v.coeffs[dof];
        let val = v.rotation.cross(&s.dof_geometry(dof).position) + Vec3::new(c[0], c[1], c[2]);
        let _ = writeln!(out, "{},{},{},{},{}", num(p[0]), num(p[1]), num(val.x), num(val.y), num(val.z));
    }
    out
}

/// `x,y,w1,w2,w3` framed components at the dofs of the displacement space.
fn framed_csv(w: &FramedField) -> String {
    let mut out = String::from("x,y,w1,w2,w3\n");
    for (p, c) in w.surface.displacement_space().dof_coords().iter().zip(&w.coeffs) {
        let _ = writeln!(out, "{},{},{},{},{}", num(p[0]), num(p[1]), num(c[0]), num(c[1]), num(c[2]));
    }
    out
}

/// Optional extras of a run.
#[derive(Debug, Default, Clone)]
pub struct Options {
    pub dump_mesh: Option<PathBuf>,
}

pub fn geom(cfg: &RunConfig, opts: &Options) -> CliResult<Value> {
    let chart = SurfaceChart::new(cfg.chart.clone())?;
    let mesh = triangulate_disk(cfg.rings)?;
    if let Some(path) = &opts.dump_mesh {
        mesh.write_dump(fs::File::create(path)?)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<[f64; 2]> = (0..256)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            [r * t.cos(), r * t.sin()]
        })
        .chain(mesh.nodes.iter().copied())
        .collect();
    let ellipticity = check_ellipticity(&chart, &samples);
    let s = surface(cfg)?;
    let mut csv = String::from("x,y,px,py,pz,gauss,mean\n");
    for p in &mesh.nodes {
        let g = shell_lab::geometry_at(&chart, clamp(*p))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(p[0]),
            num(p[1]),
            num(g.position.x),
            num(g.position.y),
            num(g.position.z),
            num(g.gauss_curvature),
            num(g.mean_curvature)
        );
    }
    write_file(&cfg.output_dir, "geometry.csv", &csv)?;
    let summary = json!({
        "area": s.area(),
        "vertices": mesh.nodes.len(),
        "triangles": mesh.triangles.len(),
        "euler_characteristic": mesh.euler_characteristic(),
        "ellipticity": match &ellipticity {
            Ok((lo, hi)) => json!({"elliptic": true, "min_curvature": lo, "max_curvature": hi}),
            Err(e) => json!({"elliptic": false, "reason": e.to_string()}),
        },
    });
    write_json(&cfg.output_dir, "geom.json", &summary)?;
    Ok(summary)
}

fn clamp(p: [f64; 2]) -> [f64; 2] {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if r > 1.0 {
        [p[0] / r, p[1] / r]
    } else {
        p
    }
}

pub fn solve_symgrad(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let b: Vec<[f64; 3]> = (0..s.n_qp())
        .map(|qp| {
            let geo = s.qp_geometry(qp);
            let m = match cfg.symgrad_case {
                SymGradCase::Metric => geo.g,
                SymGradCase::Shape => geo.h,
            };
            [m[(0, 0)], m[(0, 1)], m[(1, 1)]]
        })
        .collect();
    let (w, report) = shell_lab::solve_sym_grad(&s, &b)?;
    let solver: Arc<SymGradSolver> = s.symgrad_solver()?;
    write_file(&cfg.output_dir, "symgrad_field.csv", &framed_csv(&w))?;
    let summary = json!({
        "case": cfg.symgrad_case,
        "report": report,
        "kernel_dim": solver.kernel_dim_with(cfg.kernel_tol),
        "smallest_eigenvalue": solver.smallest_eigenvalue(),
        "data_norm": tensor_l2_norm(&s, &b),
    });
    write_json(&cfg.output_dir, "symgrad.json", &summary)?;
    Ok(summary)
}

pub fn isogen(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let mut csv = String::from("mode,sym_residual,integrability_residual,w12_norm,metric_change_slope,I_V\n");
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        let v = generate_mode(&s, mode)?;
        let (e1, e2) = (v.metric_change(0.02), v.metric_change(0.01));
        let slope = if e2 > 0.0 { (e1 / e2).log2() } else { f64::NAN };
        let i_v = shell_lab::bending_energy(&cfg.material, &v);
        let _ = writeln!(
            csv,
            "{mode},{},{},{},{},{}",
            num(v.sym_residual()),
            num(v.integrability_residual),
            num(v.w12_norm()),
            num(slope),
            num(i_v)
        );
        write_file(&cfg.output_dir, &format!("iso_{mode}.csv"), &field_csv(&s, &v))?;
        rows.push(json!({
            "mode": mode.to_string(),
            "sym_residual": v.sym_residual(),
            "integrability_residual": v.integrability_residual,
            "w12_norm": v.w12_norm(),
            "metric_change_slope": slope,
            "I_V": i_v,
        }));
    }
    write_file(&cfg.output_dir, "isogen.csv", &csv)?;
    let summary = json!({ "modes": rows });
    write_json(&cfg.output_dir, "isogen.json", &summary)?;
    Ok(summary)
}

fn first_mode(cfg: &RunConfig, s: &Arc<Surface>) -> CliResult<InfIsometry> {
    Ok(generate_mode(s, cfg.modes[0])?)
}

pub fn matching(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let v = first_mode(cfg, &s)?;
    match shell_lab::match_isometry(&s, &v, cfg.match_h, cfg.tol_fixed_point, cfg.max_iter) {
        Ok(r) => {
            let summary = serde_json::to_value(r.summary()).expect("summary serializes");
            let mut csv = String::from("iteration,update\n");
            for (k, u) in r.history.iter().enumerate() {
                let _ = writeln!(csv, "{},{}", k + 1, num(*u));
            }
            write_file(&cfg.output_dir, "match_history.csv", &csv)?;
            write_file(&cfg.output_dir, "match_w.csv", &framed_csv(&r.w))?;
            let out = json!({"status": "converged", "mode": cfg.modes[0].to_string(), "result": summary});
            write_json(&cfg.output_dir, "match.json", &out)?;
            Ok(out)
        }
        Err(error @ Error::NotConverged { .. }) => {
            let Error::NotConverged { iterations, history } = &error else {
                unreachable!()
            };
            let out = json!({
                "status": "not_converged",
                "mode": cfg.modes[0].to_string(),
                "h": cfg.match_h,
                "iterations": iterations,
                "history": history,
                "rho": shell_lab::matching::contraction_rate_of(history).ok(),
            });
            let path = write_json(&cfg.output_dir, "match.json", &out)?;
            Err(CliError::Numerical {
                error,
                artifacts: vec![path],
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn gamma_csv(rows: &[GammaRow]) -> String {
    let mut csv = String::from("h,eps,scaled_energy,I_V,ratio\n");
    for r in rows {
        let ratio = r.ratio.map_or_else(|| "NaN".to_string(), num);
        let _ = writeln!(csv, "{},{},{},{},{}", num(r.h), num(r.eps), num(r.scaled_energy), num(r.i_v), ratio);
    }
    csv
}

pub fn energy(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let v = first_mode(cfg, &s)?;
    let single = GammaConfig::new(cfg.gamma.beta, vec![cfg.energy_h], cfg.gamma.thickness_points)?;
    let rows = gamma_sweep(&cfg.material, &v, &single, tolerances(cfg))?;
    write_file(&cfg.output_dir, "energy.csv", &gamma_csv(&rows))?;
    let out = json!({"mode": cfg.modes[0].to_string(), "beta": cfg.gamma.beta, "row": rows[0]});
    write_json(&cfg.output_dir, "energy.json", &out)?;
    Ok(out)
}

fn tolerances(cfg: &RunConfig) -> SweepTolerances {
    SweepTolerances {
        tol: cfg.tol_fixed_point,
        max_iter: cfg.max_iter,
    }
}

pub fn gamma(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let v = first_mode(cfg, &s)?;
    let rows = gamma_sweep(&cfg.material, &v, &cfg.gamma, tolerances(cfg))?;
    write_file(&cfg.output_dir, "gamma.csv", &gamma_csv(&rows))?;
    let out = json!({
        "mode": cfg.modes[0].to_string(),
        "beta": cfg.gamma.beta,
        "rows": rows,
    });
    write_json(&cfg.output_dir, "gamma.json", &out)?;
    Ok(out)
}

/// Reads `G` for the force `f(x) = Gx`: three lines of three numbers.
pub fn read_force_matrix(path: &Path) -> Result<Matrix3<f64>, ConfigError> {
    let bad = |m: String| ConfigError {
        key: "loads.force".into(),
        message: m,
    };
    let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let vals: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| bad(format!("cannot parse '{t}'"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 9 {
        return Err(bad(format!("expected 9 numbers, found {}", vals.len())));
    }
    Ok(Matrix3::from_row_slice(&vals))
}

pub fn loads(cfg: &RunConfig) -> CliResult<Value> {
    let s = surface(cfg)?;
    let force = match &cfg.force {
        ForceSource::Profile(p) => ForceSpec::profile(&s, *p),
        ForceSource::File(path) => {
            let g = read_force_matrix(path)?;
            ForceSpec::from_fn(&s, move |x| g * x)
        }
    };
    let basis = Arc::new(rigid_augmented_basis(&s, cfg.loads_k_max)?);
    let problem = LimitProblem::new(&cfg.material, basis)?;
    let sol = problem.minimize(&force)?;
    let field = problem.assemble(&sol.coefficients)?;
    write_file(&cfg.output_dir, "loads_field.csv", &field_csv(&s, &field))?;
    let rotation = sol.rotation;
    let out = json!({
        "Q": (0..3).map(|i| (0..3).map(|j| rotation[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "m": sol.action,
        "J": sol.j,
        "coefficients": sol.coefficients,
        "solution": sol,
    });
    write_json(&cfg.output_dir, "loads.json", &out)?;
    Ok(out)
}

/// Subcommand names accepted by [`run`].
pub const COMMANDS: [&str; 7] = ["geom", "solve-symgrad", "isogen", "match", "energy", "gamma-sweep", "loads"];

pub fn run(command: &str, cfg: &RunConfig, opts: &Options) -> CliResult<Value> {
    match command {
        "geom" => geom(cfg, opts),
        "solve-symgrad" => solve_symgrad(cfg),
        "isogen" => isogen(cfg),
        "match" => matching(cfg),
        "energy" => energy(cfg),
        "gamma-sweep" => gamma(cfg),
        "loads" => loads(cfg),
        other => Err(CliError::Config(ConfigError {
            key: String::new(),
            message: format!("unknown subcommand '{other}'"),
        })),
    }
}

/// Writes `run.json` with the configuration echo, version and timing.
pub fn write_metadata(
    cfg: &RunConfig,
    command: &str,
    entries: &std::collections::BTreeMap<String, String>,
    elapsed: f64,
    outcome: &Value,
) -> CliResult<PathBuf> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "elapsed_seconds": elapsed,
        "config": entries,
        "resolved": cfg,
        "outcome": outcome,
    });
    write_json(&cfg.output_dir, "run.json", &meta)
}

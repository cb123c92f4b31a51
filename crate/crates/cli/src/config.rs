//! Flat `key=value` run configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shell_lab::{BoundaryMode, ChartKind, ForceProfile, GammaConfig, MaterialModel};

/// A configuration problem, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Source of the force density for the `loads` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceSource {
    Profile(ForceProfile),
    /// `f(x) = G x` with `G` read from a file of three rows of three numbers.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "chart_name")]
    pub chart: ChartKind,
    pub rings: usize,
    pub order: usize,
    pub material: MaterialModel,
    pub gamma: GammaConfig,
    #[serde(serialize_with = "mode_names")]
    pub modes: Vec<BoundaryMode>,
    pub match_h: f64,
    pub energy_h: f64,
    pub tol_fixed_point: f64,
    pub max_iter: usize,
    pub kernel_tol: f64,
    pub symgrad_case: SymGradCase,
    pub force: ForceSource,
    pub loads_k_max: u32,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn chart_name<S: serde::Serializer>(c: &ChartKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{c:?}"))
}

fn mode_names<S: serde::Serializer>(m: &[BoundaryMode], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|m| m.to_string()))
}

/// Manufactured right-hand sides for `solve-symgrad`, each with a known solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymGradCase {
    /// `B = g`, solved by the position vector.
    Metric,
    /// `B = h`, solved by the unit normal.
    Shape,
}

/// Every accepted key with its default.
const DEFAULTS: &[(&str, &str)] = &[
    ("chart.kind", "sphere_cap"),
    ("chart.radius", "1.0"),
    ("chart.extent", "0.5"),
    ("chart.axes", "1.0,1.5,1.0"),
    ("chart.hessian", "1.0,0.0,1.0"),
    ("chart.quartic", "0.0"),
    ("mesh.rings", "24"),
    ("fe.order", "2"),
    ("material.mu", "1.0"),
    ("material.lambda", "1.0"),
    ("gamma.beta", "3.0"),
    ("gamma.h_list", "0.2,0.1,0.05,0.025"),
    ("gamma.thickness_points", "3"),
    ("iso.modes", "cos2"),
    ("match.h", "0.1"),
    ("energy.h", "0.05"),
    ("tol.fixed_point", "1e-10"),
    ("tol.max_iter", "200"),
    ("tol.kernel", "1e-8"),
    ("symgrad.case", "metric"),
    ("loads.force", "axial"),
    ("loads.k_max", "4"),
    ("output.dir", "out"),
    ("seed", "0"),
];

/// Raw key/value pairs; later sources override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn defaults() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("", format!("line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
        self.merge_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !DEFAULTS.iter().any(|(k, _)| *k == key) {
            return Err(err(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("every key has a default")
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)
            .parse()
            .map_err(|_| err(key, format!("cannot parse '{}'", self.get(key))))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| err(key, format!("cannot parse '{s}'"))))
            .collect()
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.num(key)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(key, "must be positive"));
        }
        Ok(v)
    }

    fn triple(&self, key: &str) -> Result<[f64; 3], ConfigError> {
        let v = self.list(key)?;
        v.try_into().map_err(|_| err(key, "expected three comma separated numbers"))
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let chart = match self.get("chart.kind") {
            "sphere_cap" => ChartKind::SphereCap {
                radius: self.positive("chart.radius")?,
                extent: self.positive("chart.extent")?,
            },
            "ellipsoid_cap" => ChartKind::EllipsoidCap {
                axes: self.triple("chart.axes")?,
                extent: self.positive("chart.extent")?,
            },
            "graph" => ChartKind::Graph {
                hessian: self.triple("chart.hessian")?,
                quartic: self.num("chart.quartic")?,
            },
            "flat" => ChartKind::Flat,
            other => return Err(err("chart.kind", format!("unknown chart '{other}'"))),
        };
        shell_lab::SurfaceChart::new(chart.clone()).map_err(|e| err("chart.kind", e.to_string()))?;
        let rings: usize = self.num("mesh.rings")?;
        if rings < 1 {
            return Err(err("mesh.rings", "must be at least 1"));
        }
        let order: usize = self.num("fe.order")?;
        if !(1..=3).contains(&order) {
            return Err(err("fe.order", "must be 1, 2 or 3"));
        }
        let material = MaterialModel::new(self.num("material.mu")?, self.num("material.lambda")?)
            .map_err(|e| err("material.mu", e.to_string()))?;
        let beta: f64 = self.num("gamma.beta")?;
        if !(beta > 2.0 && beta < 4.0) {
            return Err(err("gamma.beta", "beta must lie in (2,4)"));
        }
        let h_list = self.list("gamma.h_list")?;
        let points: usize = self.num("gamma.thickness_points")?;
        let gamma = GammaConfig::new(beta, h_list, points).map_err(|e| {
            let key = if points == 0 { "gamma.thickness_points" } else { "gamma.h_list" };
            err(key, e.to_string())
        })?;
        let modes = self
            .get("iso.modes")
            .split(',')
            .map(|s| s.trim().parse::<BoundaryMode>().map_err(|e| err("iso.modes", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let symgrad_case = match self.get("symgrad.case") {
            "metric" => SymGradCase::Metric,
            "shape" => SymGradCase::Shape,
            other => return Err(err("symgrad.case", format!("unknown case '{other}'"))),
        };
        let force = match self.get("loads.force") {
            f if f.starts_with("file:") => ForceSource::File(PathBuf::from(&f[5..])),
            f => ForceSource::Profile(f.parse().map_err(|e: shell_lab::Error| err("loads.force", e.to_string()))?),
        };
        let max_iter: usize = self.num("tol.max_iter")?;
        if max_iter == 0 {
            return Err(err("tol.max_iter", "must be at least 1"));
        }
        let loads_k_max: u32 = self.num("loads.k_max")?;
        if loads_k_max < 2 {
            return Err(err("loads.k_max", "must be at least 2"));
        }
        Ok(RunConfig {
            chart,
            rings,
            order,
            material,
            gamma,
            modes,
            match_h: self.positive("match.h")?,
            energy_h: self.positive("energy.h")?,
            tol_fixed_point: self.positive("tol.fixed_point")?,
            max_iter,
            kernel_tol: self.positive("tol.kernel")?,
            symgrad_case,
            force,
            loads_k_max,
            output_dir: PathBuf::from(self.get("output.dir")),
            seed: self.num("seed")?,
        })
    }

    /// The effective key/value pairs, sorted by key.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig, ConfigError> {
        let mut raw = RawConfig::defaults();
        raw.merge_text(text)?;
        raw.resolve()
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve("").unwrap();
        assert_eq!(c.rings, 24);
        assert_eq!(c.gamma.h_list, vec![0.2, 0.1, 0.05, 0.025]);
    }

    #[test]
    fn accepted_example() {
        let c = resolve("gamma.beta=3.0\ngamma.h_list=0.2,0.1,0.05 # comment").unwrap();
        assert_eq!(c.gamma.h_list.len(), 3);
    }

    #[test]
    fn rejections_name_the_key() {
        let e = resolve("gamma.beta=4.0").unwrap_err();
        assert_eq!(e.key, "gamma.beta");
        assert!(e.to_string().contains("beta must lie in (2,4)"));
        assert_eq!(resolve("mesh.rings=0").unwrap_err().key, "mesh.rings");
        assert_eq!(resolve("bogus=1").unwrap_err().key, "bogus");
        assert_eq!(resolve("gamma.h_list=0.1,0.2").unwrap_err().key, "gamma.h_list");
        assert_eq!(resolve("tol.fixed_point=0").unwrap_err().key, "tol.fixed_point");
        assert_eq!(resolve("iso.modes=tan3").unwrap_err().key, "iso.modes");
        assert!(resolve("no equals sign").is_err());
    }

    #[test]
    fn later_values_override() {
        let mut raw = RawConfig::defaults();
        raw.merge_text("mesh.rings=8").unwrap();
        raw.set("mesh.rings", "12").unwrap();
        assert_eq!(raw.resolve().unwrap().rings, 12);
    }
}

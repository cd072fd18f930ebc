//! Run configuration and on-disk formats: fields as raw little-endian `f64`
//! with a JSON sidecar, reports as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coxeter::{CoxeterGroup, GeneratorSpec};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ModelParams;
use crate::solver::SolverConfig;

/// Sidecar describing a stored field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub dims: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub len: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub alpha: f64,
    pub p: f64,
    #[serde(default)]
    pub description: String,
}

impl FieldMeta {
    pub fn new(grid: &Grid, params: &ModelParams, description: impl Into<String>) -> Self {
        Self {
            dims: grid.dims,
            m: grid.m,
            len: grid.len,
            n: params.n,
            s: params.s,
            alpha: params.alpha,
            p: params.p,
            description: description.into(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims, self.m, self.len)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams { n: self.n, s: self.s, alpha: self.alpha, p: self.p, experimental: self.n < 3 }
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `stem.bin` and `stem.json`; returns both paths.
pub fn write_field(stem: &Path, u: &Field, meta: &FieldMeta) -> Result<(PathBuf, PathBuf)> {
    if meta.grid()? != u.grid {
        return Err(Error::ShapeMismatch("sidecar grid differs from the field's".into()));
    }
    let bin = with_ext(stem, "bin");
    let json = with_ext(stem, "json");
    let bytes: Vec<u8> = u.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes)?;
    fs::write(&json, serde_json::to_string_pretty(meta)?)?;
    Ok((bin, json))
}

/// Reads a field written by [`write_field`]. `path` may be the stem or
/// either of the two files.
pub fn read_field(path: &Path) -> Result<(Field, FieldMeta)> {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("bin" | "json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let meta: FieldMeta = serde_json::from_str(&fs::read_to_string(with_ext(&stem, "json"))?)?;
    let grid = meta.grid()?;
    let bytes = fs::read(with_ext(&stem, "bin"))?;
    if bytes.len() != 8 * grid.size() {
        return Err(Error::ShapeMismatch(format!(
            "{} bytes on disk, expected {} for M = {}, dims = {}",
            bytes.len(),
            8 * grid.size(),
            grid.m,
            grid.dims
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field::from_values(grid, values)?, meta))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub len: f64,
}

/// A named group or explicit generators acting on `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<GeneratorSpec>>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self::named("trivial")
    }
}

impl GroupConfig {
    pub fn named(name: &str) -> Self {
        Self { name: Some(name.to_string()), dim: None, generators: None }
    }

    pub fn resolve(&self) -> Result<CoxeterGroup> {
        match (&self.name, &self.generators) {
            (Some(name), None) => CoxeterGroup::named(name),
            (name, Some(gens)) => {
                let dim = self.dim.ok_or_else(|| Error::Config("group.generators needs group.dim".into()))?;
                let g = CoxeterGroup::from_specs(dim, gens)?;
                Ok(match name {
                    Some(n) => g.with_name(n.clone()),
                    None => g,
                })
            }
            (None, None) => Err(Error::Config("group needs a name or generators".into())),
        }
    }
}

fn default_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    2000
}
fn default_step() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub seed: u64,
    /// Bump radius of the saddle initial guess; `null` picks the default.
    #[serde(rename = "R", default)]
    pub radius: Option<f64>,
    #[serde(default = "default_true")]
    pub precondition: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
            step: default_step(),
            seed: 0,
            radius: None,
            precondition: true,
        }
    }
}

pub const OUTPUT_FORMATS: [&str; 3] = ["json", "bin", "csv"];

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<String> {
    vec!["json".into(), "bin".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), formats: default_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub groups: Vec<String>,
}

fn default_j() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    pub s: Vec<f64>,
    #[serde(rename = "J", default = "default_j")]
    pub j: usize,
    /// Stored field to extend; a seeded smooth field when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
}

fn default_rmin() -> f64 {
    crate::solver::DECAY_WINDOW.0
}
fn default_rmax() -> f64 {
    crate::solver::DECAY_WINDOW.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(default = "default_rmin")]
    pub r_min: f64,
    #[serde(default = "default_rmax")]
    pub r_max: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { field: None, r_min: default_rmin(), r_max: default_rmax() }
    }
}

/// Top-level configuration file. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ModelParams,
    pub grid: GridConfig,
    #[serde(default)]
    pub group: GroupConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check_output()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check_output(&self) -> Result<()> {
        if let Some(bad) = self.output.formats.iter().find(|f| !OUTPUT_FORMATS.contains(&f.as_str())) {
            return Err(Error::Config(format!("output format {bad:?} not one of {OUTPUT_FORMATS:?}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.n, self.grid.m, self.grid.len)
    }

    /// Solver configuration for `group`, everything else from the file.
    pub fn solver_config_for(&self, group: CoxeterGroup) -> Result<SolverConfig> {
        let s = &self.solver;
        let cfg = SolverConfig {
            params: self.problem,
            grid: self.grid()?,
            group,
            max_iters: s.max_iters,
            tol: s.tol,
            step: s.step,
            seed: s.seed,
            precondition: s.precondition,
            radius: s.radius,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        self.solver_config_for(self.group.resolve()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "problem": {"N": 3, "s": 0.5, "alpha": 2.0, "p": 2.0},
        "grid": {"M": 16, "L": 12.0},
        "group": {"name": "A1"},
        "solver": {"tol": 1e-5, "max_iters": 50, "seed": 3, "R": 1.5},
        "output": {"dir": "runs", "formats": ["json"]}
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        let sc = cfg.solver_config().unwrap();
        assert_eq!(sc.group.order(), 2);
        assert_eq!((sc.max_iters, sc.seed, sc.radius), (50, 3, Some(1.5)));
        assert_eq!(sc.step, 1.0);
        assert!(sc.precondition);
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&echoed).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        for bad in [
            SAMPLE.replace("\"seed\"", "\"sead\""),
            SAMPLE.replace("\"grid\"", "\"mesh\""),
            SAMPLE.replace("\"alpha\"", "\"beta\""),
        ] {
            assert!(RunConfig::from_json(&bad).is_err(), "{bad}");
        }
        assert!(RunConfig::from_json(&SAMPLE.replace("[\"json\"]", "[\"png\"]")).is_err());
    }

    #[test]
    fn generators_and_defaults() {
        let text = r#"{
            "problem": {"N": 3, "s": 0.5, "alpha": 2.0, "p": 2.0},
            "grid": {"M": 16, "L": 12.0},
            "group": {"dim": 2, "generators": [{"swap": [0, 1]}, {"flip": 1}]}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.group.resolve().unwrap().order(), 8);
        let trivial = RunConfig { group: GroupConfig::default(), ..cfg };
        assert!(trivial.group.resolve().unwrap().is_trivial());
    }

    #[test]
    fn rank_and_parameter_errors_surface() {
        let cfg = RunConfig::from_json(&SAMPLE.replace("\"A1\"", "\"B3\"").replace("\"N\": 3", "\"N\": 2")).unwrap();
        assert!(cfg.solver_config().is_err());
        let cfg = RunConfig::from_json(&SAMPLE.replace("\"p\": 2.0", "\"p\": 9.0")).unwrap();
        assert!(matches!(cfg.solver_config(), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(3, 8, 4.0).unwrap();
        let params = ModelParams::new(3, 0.5, 2.0, 2.0);
        let u = Field::from_fn(grid, |x| (x[0] - 0.1 * x[1]).sin() * (-x[2] * x[2]).exp() / 3.0);
        let stem = dir.path().join("u");
        let (bin, json) = write_field(&stem, &u, &FieldMeta::new(&grid, &params, "test")).unwrap();
        assert_eq!(fs::metadata(&bin).unwrap().len(), 8 * 512);
        for p in [stem.clone(), bin, json] {
            let (v, meta) = read_field(&p).unwrap();
            assert_eq!(v, u);
            assert_eq!(meta.description, "test");
            assert_eq!(meta.params(), params);
        }
        fs::write(with_ext(&stem, "bin"), [0u8; 16]).unwrap();
        assert!(matches!(read_field(&stem), Err(Error::ShapeMismatch(_))));
    }
}

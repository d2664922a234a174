//! Input files, the run configuration and atomic output.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use pef_core::field::{Grid, GridSpec, ScalarField};
use pef_core::flow::FlowConfig;
use pef_core::optimize::{self, Continuation, ObjectiveConfig, RunOptions, StepSchedule, StopCriteria};
use pef_core::{Design, ModuleShape, Netlist, PefError, Placement, Point};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    #[serde(rename = "W")]
    pub width: f64,
    #[serde(rename = "H")]
    pub height: f64,
}

/// On-disk design: outline, module sizes, nets and optional start centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub domain: Domain,
    pub modules: Vec<ModuleShape>,
    #[serde(default)]
    pub nets: Netlist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Point>>,
}

impl DesignFile {
    pub fn from_design(design: &Design, initial: Option<&Placement>) -> Self {
        Self {
            domain: Domain {
                width: design.width,
                height: design.height,
            },
            modules: design.modules.clone(),
            nets: design.netlist.clone(),
            initial: initial.map(|p| p.centers.clone()),
        }
    }

    /// Builds the design and projects `initial` onto the feasible box.
    pub fn into_design(self) -> Result<(Design, Option<Placement>)> {
        let input = |source| CliError::Input { what: "design", source };
        for m in &self.modules {
            ModuleShape::new(m.width, m.height).map_err(input)?;
        }
        let design = Design::new(self.modules, self.domain.width, self.domain.height, self.nets).map_err(input)?;
        let initial = match self.initial {
            None => None,
            Some(centers) => {
                if centers.len() != design.len() {
                    return Err(input(PefError::ShapeMismatch {
                        what: "initial centers",
                        expected: design.len(),
                        actual: centers.len(),
                    }));
                }
                if centers.iter().any(|c| !(c.x.is_finite() && c.y.is_finite())) {
                    return Err(input(PefError::InvalidConfig("initial centers must be finite".into())));
                }
                Some(optimize::project(&design, &Placement::new(centers))?)
            }
        };
        Ok((design, initial))
    }
}

/// Cell values of a density on `[0, width] x [0, height]`; `values[i][j]`
/// is the cell in column `i` (x) and row `j` (y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityFile {
    pub width: f64,
    pub height: f64,
    pub values: Vec<Vec<f64>>,
}

impl DensityFile {
    pub fn into_field(self) -> Result<ScalarField> {
        let input = |source| CliError::Input { what: "density", source };
        let nx = self.values.len();
        let ny = self.values.first().map_or(0, Vec::len);
        if let Some(row) = self.values.iter().find(|r| r.len() != ny) {
            return Err(input(PefError::ShapeMismatch {
                what: "density row",
                expected: ny,
                actual: row.len(),
            }));
        }
        let grid = Grid::new(nx, ny, self.width, self.height).map_err(input)?;
        let flat: Vec<f64> = self.values.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(input(PefError::InvalidConfig("density values must be finite".into())));
        }
        let values = Array2::from_shape_vec((nx, ny), flat).expect("rows checked");
        ScalarField::from_values(grid, values).map_err(input)
    }
}

/// Input of the `flow` command.
#[derive(Debug, Clone)]
pub enum FlowInput {
    Design(Design, Option<Placement>),
    Density(ScalarField),
}

/// Run configuration. Section and field names follow the library types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub schedule: StepSchedule,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default)]
    pub continuation: Option<Continuation>,
    #[serde(default = "default_lipschitz_samples")]
    pub lipschitz_samples: usize,
    #[serde(default = "default_true")]
    pub step_guard: bool,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    /// Low modes used for `β̂`, the certificate and spectral reports.
    #[serde(default = "default_modes")]
    pub modes: usize,
}

fn default_lipschitz_samples() -> usize {
    RunOptions::default().lipschitz_samples
}

fn default_true() -> bool {
    true
}

fn default_modes() -> usize {
    pef_core::energy::DEFAULT_MODES
}

impl Default for Config {
    fn default() -> Self {
        Self {
            objective: None,
            schedule: StepSchedule::default(),
            stop: StopCriteria::default(),
            continuation: None,
            lipschitz_samples: default_lipschitz_samples(),
            step_guard: true,
            flow: None,
            modes: default_modes(),
        }
    }
}

impl Config {
    pub fn objective(&self) -> Result<ObjectiveConfig> {
        self.objective.ok_or(CliError::MissingSection("objective"))
    }

    pub fn flow(&self) -> Result<FlowConfig> {
        self.flow.ok_or(CliError::MissingSection("flow"))
    }

    pub fn run_options(&self, seed: u64) -> RunOptions {
        RunOptions {
            schedule: self.schedule,
            stop: self.stop,
            lipschitz_samples: self.lipschitz_samples,
            seed,
            continuation: self.continuation,
            step_guard: self.step_guard,
        }
    }

    /// Replaces every grid in the file by `spec`.
    pub fn override_grid(&mut self, spec: GridSpec) {
        if let Some(o) = self.objective.as_mut() {
            o.grid = spec;
        }
        if let Some(f) = self.flow.as_mut() {
            f.grid = spec;
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(what: &'static str, path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| CliError::Parse {
        what,
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_design(path: &Path) -> Result<(Design, Option<Placement>)> {
    parse::<DesignFile>("design", path, &read(path)?)?.into_design()
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse("config", path, &read(path)?)
}

/// A design file is recognized by its `domain` key; anything else must be a
/// density file.
pub fn load_flow_input(path: &Path) -> Result<FlowInput> {
    let text = read(path)?;
    let value: serde_json::Value = parse("flow input", path, &text)?;
    if value.get("domain").is_some() {
        let (design, initial) = parse::<DesignFile>("design", path, &text)?.into_design()?;
        Ok(FlowInput::Design(design, initial))
    } else {
        Ok(FlowInput::Density(parse::<DensityFile>("density", path, &text)?.into_field()?))
    }
}

/// Files staged in memory and written together by [`Outputs::commit`], each
/// through a temporary file in the target directory and a rename.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let err = |source| CliError::Write {
                path: path.clone(),
                source,
            };
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
            tmp.write_all(bytes).map_err(err)?;
            tmp.flush().map_err(err)?;
            staged.push((tmp, path.clone()));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::Write {
                path: path.clone(),
                source: e.error,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

/// `<prefix><suffix>`, keeping the directory part of `prefix`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

//! Scenario configuration (JSON).
//!
//! Frequencies are angular, in rad/s; times in s. Key names carry the unit.

use std::path::{Path, PathBuf};

use biphoton_core::transforms::{DetectionProjection, Step, Window};
use biphoton_core::{Domain, ProcessType};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub source: SourceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub pipeline: Vec<StepConfig>,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    #[serde(rename = "type_0i", alias = "type_0", alias = "type_i")]
    Type0I,
    TypeIi,
}

impl From<Process> for ProcessType {
    fn from(p: Process) -> Self {
        match p {
            Process::Type0I => ProcessType::Type0I,
            Process::TypeIi => ProcessType::TypeII,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub process: Process,
    /// Gain `C`; exclusive with `mean_pairs`.
    pub gain: Option<f64>,
    pub mean_pairs: Option<f64>,
    pub jsa: JsaConfig,
    /// Vacuum-fed DOFs appended after the source DOFs.
    #[serde(default)]
    pub vacuum_dofs: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum JsaConfig {
    Gaussian {
        delta_plus_rad_s: f64,
        delta_minus_rad_s: f64,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width of the grids in marginal standard deviations.
    #[serde(default = "default_extent")]
    pub extent_multiplier: f64,
    /// Samples per narrowest JSA width; ignored when `points` is set.
    #[serde(default = "default_ppw")]
    pub points_per_width: f64,
    pub points: Option<usize>,
}

fn default_extent() -> f64 {
    6.0
}

fn default_ppw() -> f64 {
    4.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            extent_multiplier: default_extent(),
            points_per_width: default_ppw(),
            points: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepConfig {
    Phase {
        dof: usize,
        #[serde(default)]
        phi0_rad: f64,
        #[serde(default)]
        tau_s: f64,
        #[serde(default)]
        beta_l_s2: f64,
    },
    Fourier {
        dof: Option<usize>,
    },
    BeamSplitter {
        dofs: [usize; 2],
        /// Power transmittance `T²`.
        transmittance: f64,
    },
    Loss {
        /// Field transmittivity per DOF.
        eta: Vec<f64>,
    },
    Projection {
        windows: Vec<WindowConfig>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(default)]
    pub empty: bool,
    pub lo_rad_s: Option<f64>,
    pub hi_rad_s: Option<f64>,
    pub lo_s: Option<f64>,
    pub hi_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Exact,
    LogSeries,
    Poisson,
    Hermite,
    Linear,
    Quadratic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::LogSeries => "log_series",
            Self::Poisson => "poisson",
            Self::Hermite => "hermite",
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// One window per output DOF; missing means unbounded.
    #[serde(default)]
    pub windows: Vec<WindowConfig>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_order")]
    pub series_order: usize,
    pub pnd_cutoffs: Option<Vec<usize>>,
}

fn default_order() -> usize {
    2
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            windows: Vec::new(),
            method: Method::default(),
            series_order: default_order(),
            pnd_cutoffs: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    /// Digits after the decimal point in scientific notation.
    #[serde(default = "default_precision")]
    pub precision: usize,
}

fn default_precision() -> usize {
    16
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: None,
            precision: default_precision(),
        }
    }
}

/// Upper limit on detector count × series order handled by the trace-word expansion.
pub const MAX_SERIES_ORDER: usize = 12;

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "(root)".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let JsaConfig::Csv { path: p } = &mut cfg.source.jsa {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn source_dofs(&self) -> usize {
        match self.source.process {
            Process::Type0I => 1,
            Process::TypeIi => 2,
        }
    }

    pub fn total_dofs(&self) -> usize {
        self.source_dofs() + self.source.vacuum_dofs
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        match (s.gain, s.mean_pairs) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(CliError::config("source", "give exactly one of `gain` and `mean_pairs`"))
            }
            (Some(c), None) => non_negative("source.gain", c)?,
            (None, Some(m)) => non_negative("source.mean_pairs", m)?,
        }
        if let JsaConfig::Gaussian {
            delta_plus_rad_s,
            delta_minus_rad_s,
        } = s.jsa
        {
            positive("source.jsa.gaussian.delta_plus_rad_s", delta_plus_rad_s)?;
            positive("source.jsa.gaussian.delta_minus_rad_s", delta_minus_rad_s)?;
        }
        positive("grid.extent_multiplier", self.grid.extent_multiplier)?;
        positive("grid.points_per_width", self.grid.points_per_width)?;
        if let Some(n) = self.grid.points {
            if n < 2 {
                return Err(CliError::config("grid.points", "need at least 2 points"));
            }
        }

        let m = self.total_dofs();
        let mut domains = vec![Domain::Frequency; m];
        let dof_ok = |path: String, d: usize| {
            if d >= m {
                Err(CliError::config(path, format!("DOF {d} out of range (0..{m})")))
            } else {
                Ok(())
            }
        };
        for (k, step) in self.pipeline.iter().enumerate() {
            let at = |field: &str| format!("pipeline[{k}].{field}");
            match step {
                StepConfig::Phase {
                    dof,
                    phi0_rad,
                    tau_s,
                    beta_l_s2,
                } => {
                    dof_ok(at("dof"), *dof)?;
                    finite(&at("phi0_rad"), *phi0_rad)?;
                    finite(&at("tau_s"), *tau_s)?;
                    finite(&at("beta_l_s2"), *beta_l_s2)?;
                    if domains[*dof] != Domain::Frequency {
                        return Err(CliError::config(at("dof"), "phase acts on frequency-domain DOFs"));
                    }
                }
                StepConfig::Fourier { dof } => match dof {
                    Some(d) => {
                        dof_ok(at("dof"), *d)?;
                        if domains[*d] == Domain::Time {
                            return Err(CliError::config(at("dof"), "DOF is already in the time domain"));
                        }
                        domains[*d] = Domain::Time;
                    }
                    None => {
                        if domains.contains(&Domain::Time) {
                            return Err(CliError::config(at("dof"), "some DOF is already in the time domain"));
                        }
                        domains.fill(Domain::Time);
                    }
                },
                StepConfig::BeamSplitter { dofs, transmittance } => {
                    dof_ok(at("dofs[0]"), dofs[0])?;
                    dof_ok(at("dofs[1]"), dofs[1])?;
                    if dofs[0] == dofs[1] {
                        return Err(CliError::config(at("dofs"), "a beam splitter needs two distinct DOFs"));
                    }
                    if !(0.0..=1.0).contains(transmittance) {
                        return Err(CliError::config(at("transmittance"), "must lie in [0, 1]"));
                    }
                    if domains[dofs[0]] != domains[dofs[1]] {
                        return Err(CliError::config(at("dofs"), "both DOFs must share one domain"));
                    }
                }
                StepConfig::Loss { eta } => {
                    if eta.len() != m {
                        return Err(CliError::config(at("eta"), format!("expected {m} transmittivities")));
                    }
                    for (i, e) in eta.iter().enumerate() {
                        if !(0.0..=1.0).contains(e) {
                            return Err(CliError::config(at(&format!("eta[{i}]")), "must lie in [0, 1]"));
                        }
                    }
                }
                StepConfig::Projection { windows } => {
                    check_windows(&at("windows"), windows, &domains)?;
                }
            }
        }
        let d = &self.detection;
        if !d.windows.is_empty() {
            check_windows("detection.windows", &d.windows, &domains)?;
        }
        if d.method == Method::LogSeries && !(1..=MAX_SERIES_ORDER).contains(&d.series_order) {
            return Err(CliError::config(
                "detection.series_order",
                format!("must lie in 1..={MAX_SERIES_ORDER}"),
            ));
        }
        if let Some(c) = &d.pnd_cutoffs {
            if c.iter().any(|n| *n > 200) {
                return Err(CliError::config("detection.pnd_cutoffs", "cutoffs above 200 are not supported"));
            }
        }
        if self.output.precision == 0 || self.output.precision > 20 {
            return Err(CliError::config("output.precision", "must lie in 1..=20"));
        }
        Ok(())
    }

    /// Pipeline steps for the core composer.
    pub fn steps(&self) -> Result<Vec<Step>> {
        let mut domains = vec![Domain::Frequency; self.total_dofs()];
        let mut out = Vec::with_capacity(self.pipeline.len());
        for (k, step) in self.pipeline.iter().enumerate() {
            out.push(match step {
                StepConfig::Phase {
                    dof,
                    phi0_rad,
                    tau_s,
                    beta_l_s2,
                } => Step::Phase {
                    phi0: *phi0_rad,
                    tau: *tau_s,
                    beta_l: *beta_l_s2,
                    dof: *dof,
                },
                StepConfig::Fourier { dof } => {
                    match dof {
                        Some(d) => domains[*d] = Domain::Time,
                        None => domains.fill(Domain::Time),
                    }
                    Step::Fourier { dof: *dof }
                }
                StepConfig::BeamSplitter { dofs, transmittance } => Step::BeamSplitter {
                    t: transmittance.sqrt(),
                    dofs: (dofs[0], dofs[1]),
                },
                StepConfig::Loss { eta } => Step::Loss { etas: eta.clone() },
                StepConfig::Projection { windows } => {
                    Step::Projection(projection(&format!("pipeline[{k}].windows"), windows, &domains)?)
                }
            });
        }
        Ok(out)
    }

    /// Output DOF domains after the pipeline.
    pub fn output_domains(&self) -> Vec<Domain> {
        let mut domains = vec![Domain::Frequency; self.total_dofs()];
        for step in &self.pipeline {
            if let StepConfig::Fourier { dof } = step {
                match dof {
                    Some(d) => domains[*d] = Domain::Time,
                    None => domains.fill(Domain::Time),
                }
            }
        }
        domains
    }

    /// Detection projection on the output DOFs.
    pub fn detection_projection(&self) -> Result<DetectionProjection> {
        let domains = self.output_domains();
        if self.detection.windows.is_empty() {
            return Ok(DetectionProjection::new(domains.iter().map(|d| Window::unbounded(*d)).collect()));
        }
        projection("detection.windows", &self.detection.windows, &domains)
    }
}

fn check_windows(path: &str, windows: &[WindowConfig], domains: &[Domain]) -> Result<()> {
    if windows.len() != domains.len() {
        return Err(CliError::config(path, format!("expected {} windows, one per DOF", domains.len())));
    }
    projection(path, windows, domains).map(|_| ())
}

fn projection(path: &str, windows: &[WindowConfig], domains: &[Domain]) -> Result<DetectionProjection> {
    windows
        .iter()
        .zip(domains)
        .enumerate()
        .map(|(i, (w, d))| window(&format!("{path}[{i}]"), w, *d))
        .collect::<Result<Vec<_>>>()
        .map(DetectionProjection::new)
}

fn window(path: &str, w: &WindowConfig, domain: Domain) -> Result<Window> {
    let (lo, hi, wrong) = match domain {
        Domain::Frequency => (w.lo_rad_s, w.hi_rad_s, w.lo_s.is_some() || w.hi_s.is_some()),
        Domain::Time => (w.lo_s, w.hi_s, w.lo_rad_s.is_some() || w.hi_rad_s.is_some()),
    };
    if wrong {
        let want = match domain {
            Domain::Frequency => "`lo_rad_s`/`hi_rad_s` (frequency-domain DOF)",
            Domain::Time => "`lo_s`/`hi_s` (time-domain DOF)",
        };
        return Err(CliError::config(path, format!("use {want}")));
    }
    if w.empty {
        if lo.is_some() || hi.is_some() {
            return Err(CliError::config(path, "an empty window takes no bounds"));
        }
        return Ok(Window::empty(domain));
    }
    let lo = lo.unwrap_or(f64::NEG_INFINITY);
    let hi = hi.unwrap_or(f64::INFINITY);
    Window::new(lo, hi, domain).map_err(|e| CliError::config(path, e.to_string()))
}

fn finite(path: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, "must be finite"))
    }
}

fn non_negative(path: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(CliError::config(path, "must be finite and non-negative"))
    }
}

fn positive(path: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(path, "must be finite and positive"))
    }
}

//! TOML run configuration: strict parsing, defaulting and validation.
//!
//! ```toml
//! experiment = "example1-case1"
//! out = "results"
//! resolutions = ["1/40", "1/80"]
//!
//! [model]
//! g = "1-rho"
//!
//! [cfl]
//! mode = "bv-strict"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::{
    example_datum, Case, Example1Config, Example2Config, Problem, DEFAULT_DOMAIN, DEFAULT_T_FINAL,
};
use crate::kernel::{support_cells, KernelSpec};
use crate::mesh::{parse_length, PiecewiseConstant};
use crate::model::{CflMode, ModelSpec, Profile, DEFAULT_CFL_SAFETY};

/// A positive length that remembers how it was written, so `"1/320"`
/// survives a round trip unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Length {
    text: String,
    value: f64,
}

impl Length {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn from_value(value: f64) -> Self {
        Self {
            text: format!("{value}"),
            value,
        }
    }
}

impl FromStr for Length {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self {
            text: s.trim().to_owned(),
            value: parse_length(s)?,
        })
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) => {
                if v > 0.0 && v.is_finite() {
                    Ok(Self::from_value(v))
                } else {
                    Err(serde::de::Error::custom(format!("length must be positive, got {v}")))
                }
            }
        }
    }
}

/// A profile given by name (`"1-rho"`) or by polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Coefficients(Vec<f64>),
}

impl ProfileSpec {
    pub fn build(&self, rho_max: f64) -> Result<Profile> {
        match self {
            ProfileSpec::Named(name) => Profile::named(name, rho_max),
            ProfileSpec::Coefficients(c) => Profile::new(c.clone(), rho_max),
        }
    }
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named("1-rho".into())
    }
}

impl FromStr for ProfileSpec {
    type Err = Error;

    /// A name, or comma-separated coefficients `c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        if s.contains(',') || s.trim().parse::<f64>().is_ok() {
            let coeffs = s
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidProfile(format!("cannot parse coefficient {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProfileSpec::Coefficients(coeffs))
        } else {
            Ok(ProfileSpec::Named(s.trim().to_owned()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Example1Case1,
    Example1Case2,
    Example2Case1,
    Example2Case2,
    Custom,
}

impl ExperimentKind {
    pub fn case(self) -> Option<Case> {
        match self {
            Self::Example1Case1 | Self::Example2Case1 => Some(Case::I),
            Self::Example1Case2 | Self::Example2Case2 => Some(Case::II),
            Self::Custom => None,
        }
    }

    /// `1` or `2` for the canned examples.
    pub fn example(self) -> Option<u8> {
        match self {
            Self::Example1Case1 | Self::Example1Case2 => Some(1),
            Self::Example2Case1 | Self::Example2Case2 => Some(2),
            Self::Custom => None,
        }
    }

    pub fn select(example: &str, case: Case) -> Result<Self> {
        Ok(match (example, case) {
            ("example1", Case::I) => Self::Example1Case1,
            ("example1", Case::II) => Self::Example1Case2,
            ("example2", Case::I) => Self::Example2Case1,
            ("example2", Case::II) => Self::Example2Case2,
            ("custom", _) => Self::Custom,
            (other, _) => {
                return Err(Error::Config(format!(
                    "unknown experiment {other:?} (expected example1, example2 or custom)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Defaults to the selected case's velocity factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_r: Option<f64>,
    #[serde(default)]
    pub psi: ProfileSpec,
    #[serde(default)]
    pub g: ProfileSpec,
    #[serde(default = "one")]
    pub rho_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k_l: None,
            k_r: None,
            psi: ProfileSpec::default(),
            g: ProfileSpec::default(),
            rho_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    #[default]
    Linear,
    Constant,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub kind: KernelName,
    #[serde(default = "default_eta")]
    pub eta: Length,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelName::Linear,
            eta: default_eta(),
            coefficients: None,
        }
    }
}

impl KernelConfig {
    pub fn spec(&self) -> Result<KernelSpec> {
        let eta = self.eta.value();
        let spec = match (self.kind, &self.coefficients) {
            (KernelName::Linear, None) => KernelSpec::linear(eta),
            (KernelName::Constant, None) => KernelSpec::constant(eta),
            (KernelName::Polynomial, Some(c)) => KernelSpec::polynomial(eta, c.clone()),
            (KernelName::Polynomial, None) => {
                return Err(Error::Config("kernel.coefficients is required for kind = \"polynomial\"".into()))
            }
            (_, Some(_)) => {
                return Err(Error::Config(
                    "kernel.coefficients is only allowed with kind = \"polynomial\"".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CflConfig {
    #[serde(default)]
    pub mode: CflMode,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

impl Default for CflConfig {
    fn default() -> Self {
        Self {
            mode: CflMode::Basic,
            safety: DEFAULT_CFL_SAFETY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Extent to the left of `x = 0`.
    pub left: f64,
    /// Extent to the right of `x = 0`.
    pub right: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            left: DEFAULT_DOMAIN.0,
            right: DEFAULT_DOMAIN.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for DatumConfig {
    fn default() -> Self {
        let d = example_datum();
        Self {
            breakpoints: d.breakpoints().to_vec(),
            values: d.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Test resolutions (Example 1) or the custom run's single `dx` (first entry).
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<Length>,
    #[serde(default = "default_reference")]
    pub reference_dx: Length,
    /// Example 2: kernel supports to compare against the local limit.
    #[serde(default = "default_etas")]
    pub etas: Vec<Length>,
    /// Example 2: mesh size.
    #[serde(default = "default_example2_dx")]
    pub dx: Length,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Example 1: snapshot times (defaults depend on the case).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    /// Example 2: emit the `(dx, T) = (1/3200, 0.7)` figure dataset.
    #[serde(default = "yes")]
    pub figure: bool,
    #[serde(default)]
    pub entropy_sweep: bool,
    /// Reduced-size configuration (set by `apply_desk_scale`); flagged in
    /// the outputs.
    #[serde(default)]
    pub desk_scale: bool,
    /// Worker threads; `0` means all available.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub cfl: CflConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub datum: DatumConfig,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_eta() -> Length {
    "0.4".parse().expect("valid length")
}

fn default_safety() -> f64 {
    DEFAULT_CFL_SAFETY
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_resolutions() -> Vec<Length> {
    ["1/40", "1/80", "1/160", "1/320", "1/640"]
        .iter()
        .map(|s| s.parse().expect("valid length"))
        .collect()
}

fn default_reference() -> Length {
    "1/1280".parse().expect("valid length")
}

fn default_etas() -> Vec<Length> {
    ["0.1", "0.02", "0.005"]
        .iter()
        .map(|s| s.parse().expect("valid length"))
        .collect()
}

fn default_example2_dx() -> Length {
    "1/1600".parse().expect("valid length")
}

fn default_t_final() -> f64 {
    DEFAULT_T_FINAL
}

impl RunConfig {
    /// All defaults for the given experiment.
    pub fn new(experiment: ExperimentKind) -> Self {
        toml::from_str::<Self>(&format!(
            "experiment = \"{}\"",
            serde_plain_name(experiment)
        ))
        .expect("defaults deserialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn case(&self) -> Case {
        self.experiment.case().unwrap_or(Case::I)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let (dk_l, dk_r) = self.case().speeds();
        ModelSpec::new(
            m.k_l.unwrap_or(dk_l),
            m.k_r.unwrap_or(dk_r),
            m.psi.build(m.rho_max)?,
            m.g.build(m.rho_max)?,
            m.rho_max,
        )
    }

    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem {
            model: self.model_spec()?,
            kernel: self.kernel.spec()?,
            datum: PiecewiseConstant::new(self.datum.breakpoints.clone(), self.datum.values.clone())?,
            domain: (self.domain.left, self.domain.right),
            cfl_mode: self.cfl.mode,
            cfl_safety: self.cfl.safety,
            execution: self.execution,
        })
    }

    pub fn example1(&self) -> Example1Config {
        let mut c = Example1Config::new(self.case());
        c.resolutions = self.resolutions.iter().map(Length::value).collect();
        c.reference_dx = self.reference_dx.value();
        c.t_final = self.t_final;
        if let Some(times) = &self.snapshot_times {
            c.snapshot_times = times.clone();
        }
        c.entropy_sweep = self.entropy_sweep;
        c.desk_scale = self.desk_scale;
        c
    }

    pub fn example2(&self) -> Example2Config {
        let mut c = Example2Config::new(self.case());
        c.etas = self.etas.iter().map(Length::value).collect();
        c.dx = self.dx.value();
        c.t_final = self.t_final;
        if !self.figure {
            c.figure = None;
        }
        c
    }

    /// Switches to the reduced-size configuration of the selected example.
    pub fn apply_desk_scale(&mut self) {
        self.desk_scale = true;
        let case = self.case();
        match self.experiment.example() {
            Some(1) => {
                let d = Example1Config::desk_scale(case);
                self.resolutions = d.resolutions.iter().map(|&v| rational(v)).collect();
                self.reference_dx = rational(d.reference_dx);
            }
            Some(2) => {
                let d = Example2Config::desk_scale(case);
                self.etas = d.etas.iter().map(|&v| Length::from_value(v)).collect();
                self.dx = rational(d.dx);
                self.figure = false;
            }
            _ => {}
        }
    }

    /// Checks every constraint that can be decided without running.
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Error::Config(format!("{key}: {msg}"));
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(err("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if let Some(times) = &self.snapshot_times {
            if times.iter().any(|t| !(*t > 0.0)) {
                return Err(err("snapshot_times", "all times must be positive".into()));
            }
        }
        if !(self.cfl.safety > 0.0 && self.cfl.safety <= 1.0) {
            return Err(err("cfl.safety", format!("must lie in (0, 1], got {}", self.cfl.safety)));
        }
        if !(self.domain.left > 0.0 && self.domain.right > 0.0) {
            return Err(err("domain", "left and right extents must be positive".into()));
        }
        if self.resolutions.is_empty() {
            return Err(err("resolutions", "at least one dx is required".into()));
        }
        self.model_spec().map_err(|e| err("model", e.to_string()))?;
        self.kernel.spec().map_err(|e| err("kernel", e.to_string()))?;
        PiecewiseConstant::new(self.datum.breakpoints.clone(), self.datum.values.clone())
            .map_err(|e| err("datum", e.to_string()))?;
        if self.datum.values.iter().any(|v| !(0.0..=self.model.rho_max).contains(v)) {
            return Err(err("datum.values", format!("must lie in [0, {}]", self.model.rho_max)));
        }

        let eta = self.kernel.eta.value();
        match self.experiment.example() {
            Some(2) => {
                if self.etas.is_empty() {
                    return Err(err("etas", "at least one eta is required".into()));
                }
                for e in &self.etas {
                    support_cells(e.value(), self.dx.value()).map_err(|x| err("etas", x.to_string()))?;
                }
            }
            _ => {
                for dx in &self.resolutions {
                    support_cells(eta, dx.value()).map_err(|x| err("resolutions", x.to_string()))?;
                }
                if self.experiment.example() == Some(1) {
                    support_cells(eta, self.reference_dx.value())
                        .map_err(|x| err("reference_dx", x.to_string()))?;
                    for dx in &self.resolutions {
                        crate::diagnostics::refinement_ratio(dx.value(), self.reference_dx.value())
                            .map_err(|x| err("reference_dx", x.to_string()))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// `1/n` written as a ratio when `v` is the reciprocal of an integer.
fn rational(v: f64) -> Length {
    let n = (1.0 / v).round();
    if (1.0 / n - v).abs() <= 1e-15 * v {
        format!("1/{n}").parse().expect("valid length")
    } else {
        Length::from_value(v)
    }
}

fn serde_plain_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Example1Case1 => "example1-case1",
        ExperimentKind::Example1Case2 => "example1-case2",
        ExperimentKind::Example2Case1 => "example2-case1",
        ExperimentKind::Example2Case2 => "example2-case2",
        ExperimentKind::Custom => "custom",
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(serde_plain_name(*self))
    }
}

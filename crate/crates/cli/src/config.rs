//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[curve]`, `[kernel]`,
//! `[run]`, `[checks]` and, for sweeps, `[sweep]`. Unknown keys are rejected.
//!
//! ```toml
//! pipeline = "evolve"            # validate | energy | evolve | sweep
//! output_dir = "out/circle"
//!
//! [curve]
//! kind = "circle"                # circle | trefoil | brownian_bridge | file
//! n = 128                        # power of two in [8, 1024]
//! nu = 0.9                       # in (1/3, 1)
//! seed = 1                       # brownian_bridge only
//! scale = 1.0                    # radius, trefoil size or bridge amplitude
//! # path = "curve.txt"           # kind = "file": a curve snapshot
//!
//! [kernel]
//! gamma = 1.0                    # circulation, >= 0
//! mu = 1.0                       # core size, > 0
//!
//! [run]
//! t_final = 0.5
//! dt = 0.001
//! scheme = "rk4"                 # rk4 | euler
//! diagnostics_every = 50         # steps
//! snapshot_every = 100           # steps, multiple of diagnostics_every
//! remainder_pairs = 8            # 0 disables the direct remainder check
//!
//! [checks]
//! enabled = ["drift", "envelopes"]
//! drift_tolerance = 1e-6
//! agreement_tolerance = 1e-3
//! fourier = true
//!
//! [sweep]
//! pipeline = "energy"
//! parameter = "kernel.mu"        # kernel.mu | kernel.gamma | curve.n | curve.nu | curve.seed | run.dt
//! values = [0.5, 1.0, 2.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use roughfil_core::circle_algebra::CircleGrid;
use roughfil_core::evolution::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Validate,
    Energy,
    Evolve,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Circle,
    Trefoil,
    BrownianBridge,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { gamma: 1.0, mu: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_diag")]
    pub diagnostics_every: usize,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_pairs")]
    pub remainder_pairs: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            t_final: default_t_final(),
            dt: default_dt(),
            scheme: default_scheme(),
            diagnostics_every: default_diag(),
            snapshot_every: None,
            remainder_pairs: default_pairs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Hypothesis,
    Chen,
    EnergyAgreement,
    EnergyPositivity,
    VelocityBound,
    Drift,
    Envelopes,
    RemainderConsistency,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hypothesis => "hypothesis",
            Self::Chen => "chen",
            Self::EnergyAgreement => "energy_agreement",
            Self::EnergyPositivity => "energy_positivity",
            Self::VelocityBound => "velocity_bound",
            Self::Drift => "drift",
            Self::Envelopes => "envelopes",
            Self::RemainderConsistency => "remainder_consistency",
        }
    }

    fn pipeline(self) -> Pipeline {
        match self {
            Self::Drift | Self::Envelopes | Self::RemainderConsistency => Pipeline::Evolve,
            _ => Pipeline::Energy,
        }
    }
}

pub const ENERGY_CHECKS: [CheckName; 5] = [
    CheckName::Hypothesis,
    CheckName::Chen,
    CheckName::EnergyAgreement,
    CheckName::EnergyPositivity,
    CheckName::VelocityBound,
];
pub const EVOLVE_CHECKS: [CheckName; 3] = [CheckName::Drift, CheckName::Envelopes, CheckName::RemainderConsistency];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default)]
    pub enabled: Option<Vec<CheckName>>,
    #[serde(default = "default_drift_tol")]
    pub drift_tolerance: f64,
    #[serde(default = "default_agreement_tol")]
    pub agreement_tolerance: f64,
    #[serde(default = "yes")]
    pub fourier: bool,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            enabled: None,
            drift_tolerance: default_drift_tol(),
            agreement_tolerance: default_agreement_tol(),
            fourier: true,
        }
    }
}

impl ChecksSpec {
    pub fn for_pipeline(&self, p: Pipeline) -> Vec<CheckName> {
        match &self.enabled {
            Some(list) => list.iter().copied().filter(|c| c.pipeline() == p).collect(),
            None => match p {
                Pipeline::Energy => ENERGY_CHECKS.to_vec(),
                Pipeline::Evolve => EVOLVE_CHECKS.to_vec(),
                _ => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "kernel.mu")]
    KernelMu,
    #[serde(rename = "kernel.gamma")]
    KernelGamma,
    #[serde(rename = "curve.n")]
    CurveN,
    #[serde(rename = "curve.nu")]
    CurveNu,
    #[serde(rename = "curve.seed")]
    CurveSeed,
    #[serde(rename = "run.dt")]
    RunDt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub pipeline: Pipeline,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    /// Not echoed into summaries, so that reruns elsewhere compare equal.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub curve: CurveSpec,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_n() -> usize {
    128
}
fn default_nu() -> f64 {
    0.9
}
fn default_t_final() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    1e-3
}
fn default_scheme() -> Scheme {
    Scheme::Rk4
}
fn default_diag() -> usize {
    50
}
fn default_pairs() -> usize {
    8
}
fn default_drift_tol() -> f64 {
    1e-6
}
fn default_agreement_tol() -> f64 {
    1e-3
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        if let (CurveKind::File, Some(p)) = (s.curve.kind, s.curve.path.as_ref()) {
            if p.is_relative() {
                s.curve.path = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(s)
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.curve;
        if c.kind != CurveKind::File {
            CircleGrid::new(c.n).map_err(|_| bad(format!("curve.n = {} must be a power of two between 8 and 1024", c.n)))?;
        }
        if !(c.nu > 1.0 / 3.0 && c.nu < 1.0) {
            return Err(bad(format!("curve.nu = {} violates the constraint nu in (1/3, 1)", c.nu)));
        }
        if !(c.scale > 0.0 && c.scale.is_finite()) {
            return Err(bad(format!("curve.scale = {} must be positive", c.scale)));
        }
        match c.kind {
            CurveKind::BrownianBridge if c.seed.is_none() => return Err(bad("curve.seed is required for brownian_bridge")),
            CurveKind::File if c.path.is_none() => return Err(bad("curve.path is required for kind = \"file\"")),
            _ => {}
        }
        let k = &self.kernel;
        if !(k.gamma >= 0.0 && k.gamma.is_finite()) {
            return Err(bad(format!("kernel.gamma = {} must be >= 0", k.gamma)));
        }
        if !(k.mu > 0.0 && k.mu.is_finite()) {
            return Err(bad(format!("kernel.mu = {} must be > 0", k.mu)));
        }
        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(bad(format!("run.dt = {} must be > 0", r.dt)));
        }
        if !(r.t_final > 0.0 && r.t_final.is_finite()) {
            return Err(bad(format!("run.t_final = {} must be > 0", r.t_final)));
        }
        let steps = (r.t_final / r.dt).round();
        if (steps * r.dt - r.t_final).abs() > 1e-9 * r.t_final {
            return Err(bad(format!("run.dt = {} must divide run.t_final = {}", r.dt, r.t_final)));
        }
        if r.diagnostics_every == 0 {
            return Err(bad("run.diagnostics_every must be >= 1"));
        }
        if let Some(se) = r.snapshot_every {
            if se == 0 || se % r.diagnostics_every != 0 {
                return Err(bad("run.snapshot_every must be a positive multiple of run.diagnostics_every"));
            }
        }
        let ch = &self.checks;
        if !(ch.drift_tolerance > 0.0 && ch.agreement_tolerance > 0.0) {
            return Err(bad("check tolerances must be positive"));
        }
        if self.pipeline == Some(Pipeline::Sweep) && self.sweep.is_none() {
            return Err(bad("pipeline = \"sweep\" needs a [sweep] section"));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(bad("sweep.values is empty"));
            }
            if matches!(sw.pipeline, Pipeline::Sweep | Pipeline::Validate) {
                return Err(bad("sweep.pipeline must be energy or evolve"));
            }
            for &v in &sw.values {
                self.with_parameter(sw.parameter, v)?;
            }
        }
        Ok(())
    }

    /// Copy with one parameter replaced, validated.
    pub fn with_parameter(&self, p: SweepParameter, v: f64) -> Result<Self, ConfigError> {
        let mut s = self.clone();
        s.sweep = None;
        s.pipeline = None;
        let as_int = || -> Result<u64, ConfigError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(bad(format!("sweep value {v} must be a non-negative integer")))
            }
        };
        match p {
            SweepParameter::KernelMu => s.kernel.mu = v,
            SweepParameter::KernelGamma => s.kernel.gamma = v,
            SweepParameter::CurveN => s.curve.n = as_int()? as usize,
            SweepParameter::CurveNu => s.curve.nu = v,
            SweepParameter::CurveSeed => s.curve.seed = Some(as_int()?),
            SweepParameter::RunDt => s.run.dt = v,
        }
        s.validate()?;
        Ok(s)
    }
}

//! Run configurations. Every file carries `"schema": "pidgain/1"`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};

use pidgain::certificates::Mode;
use pidgain::plants::{ClaimedClass, ClassBounds, PlantSpec};
use pidgain::regions::{FixedGain, GainTriple};
use pidgain::simulator::SimConfig;

use crate::CliError;

pub const SCHEMA: &str = "pidgain/1";

/// The `schema` field; any other value is rejected at that path.
#[derive(Debug, Clone, Copy)]
pub struct Schema;

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == SCHEMA {
            Ok(Schema)
        } else {
            Err(serde::de::Error::custom(format!("unsupported schema {s:?}, expected {SCHEMA:?}")))
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let at = if at == "." { "<root>".to_string() } else { at };
        CliError::Usage(format!("{}: at `{at}`: {}", path.display(), e.inner()))
    })
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub b_lower: f64,
}

impl Gains {
    pub fn triple(&self) -> Result<GainTriple, CliError> {
        Ok(GainTriple::new(self.kp, self.ki, self.kd, self.b_lower)?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

impl Bounds {
    pub fn class(&self) -> Result<ClassBounds, CliError> {
        Ok(ClassBounds::new(self.l1, self.l2)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionCheck {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub bounds: Bounds,
    pub gains: Gains,
    /// Actual input gain; defaults to `b_lower`.
    #[serde(default)]
    pub b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSlice {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub bounds: Bounds,
    pub b_lower: f64,
    pub fixed: FixedGain,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certify {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub bounds: Bounds,
    pub gains: Gains,
    #[serde(default)]
    pub b: Option<f64>,
    pub plant: PlantSpec,
    pub setpoint: Vec<f64>,
    pub mode: Mode,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Half-width of the `(y, z)` sampling box.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateAttach {
    pub bounds: Bounds,
    pub mode: Mode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub plant: PlantSpec,
    pub gains: Gains,
    #[serde(default)]
    pub b: Option<f64>,
    pub setpoint: Vec<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub certificate: Option<CertificateAttach>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self.count {
            0 => Err(CliError::Usage("grid axis count must be positive".into())),
            1 => Ok(vec![self.from]),
            m => Ok((0..m).map(|i| self.from + (self.to - self.from) * i as f64 / (m - 1) as f64).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub kp: Axis,
    pub ki: Axis,
    pub kd: Axis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub bounds: Bounds,
    pub b_lower: f64,
    #[serde(default)]
    pub b: Option<f64>,
    pub plants: Vec<PlantSpec>,
    pub grid: Grid,
    /// Setpoint on the first coordinate; the others are zero.
    #[serde(default = "default_setpoint")]
    pub setpoint: f64,
    #[serde(default)]
    pub sim: SimConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Falsify {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub bounds: Bounds,
    pub gains: Gains,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_setpoint")]
    pub setpoint: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCheck {
    #[serde(rename = "schema")]
    _schema: Schema,
    pub plant: PlantSpec,
    pub bounds: Bounds,
    pub class: ClaimedClass,
    /// Half-width of the `(x₁, x₂)` sampling box.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    1000
}

fn default_radius() -> f64 {
    5.0
}

fn default_setpoint() -> f64 {
    1.0
}

fn default_n() -> usize {
    1
}

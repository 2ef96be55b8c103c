//! Scenario file schema.
//!
//! Units: time in seconds, mass in kg, inertia in kg m^2, angles in rad,
//! angular rates in rad/s, velocities in m/s. Matrices are row-major lists
//! of rows. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub plant: PlantSection,
    pub kernel: KernelSection,
    pub centers: CentersSection,
    pub observer: ObserverSection,
    pub deadzone: DeadzoneSection,
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantFamily {
    GenericLinear,
    RigidTranslational,
    RigidRotational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub family: PlantFamily,
    /// Body mass (rigid_translational).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Inertia matrix (rigid_rotational).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<Vec<Vec<f64>>>,
    /// System matrices (generic_linear).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    pub uncertainty: UncertaintySpec,
    pub measurement_error: SignalSpec,
    /// Declared bound on the measurement error norm.
    pub delta_bar: f64,
    /// Multiplies both the measurement error signal and `delta_bar`.
    pub noise_scale: f64,
    pub disturbance: SignalSpec,
    pub controller: ControllerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintySpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `[cos(y1^2), sin(y2^2) + sin(y1), cos(y3) + sin(y2)]`.
    TrigVelocityForce,
    /// `-coefficient |y| y`.
    QuadraticDrag { coefficient: f64 },
    /// Element of the observer's kernel span with the given coefficients (center-major).
    Kernel { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformName {
    Sin,
    Cos,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub waveform: WaveformName,
    pub amplitude: f64,
    /// rad/s.
    pub frequency: f64,
    /// rad.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Zero,
    /// `0.008 (sin 0.5t + cos 0.5t)` on every channel.
    Translational,
    /// `0.05 sin 5t` on every channel.
    Rotational,
    /// The same sum of terms on every channel.
    Broadcast { terms: Vec<TermSpec> },
    /// One sum of terms per channel.
    PerChannel { channels: Vec<Vec<TermSpec>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `u = -[I I](x - x_r) + B^+ x_r'`.
    TranslationalTracking,
    /// `u = -gain (omega - omega_r) + omega_r'`.
    RotationalTracking { gain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    SobolevMatern,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelName,
    /// Sobolev order `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    /// Input dimension `d` of the Sobolev kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<u32>,
    /// Length scale, in units of `y`.
    pub length_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentersSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: usize,
    /// Probe grid resolution for the power-function supremum.
    pub probe_points_per_axis: usize,
    /// Sample grid resolution for projecting the uncertainty onto the span.
    pub projection_points_per_axis: usize,
    pub jitter_initial: f64,
    pub jitter_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateName {
    SmoothDeadzone,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub l: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub lure_epsilon: f64,
    /// Tolerance on `|P B - C^T|` for a certified design.
    #[serde(default = "default_spr_tolerance")]
    pub spr_tolerance: f64,
    pub gate: GateName,
    /// Switch radius of the step gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_radius: Option<f64>,
    /// Accept designs with non-Hurwitz `A - LC` or no Lur'e solution.
    pub allow_uncertified: bool,
}

fn default_spr_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadzoneSection {
    pub width: f64,
    pub buffer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t0: f64,
    pub t_final: f64,
    pub h: f64,
    pub record_stride: usize,
    /// Defaults: reference state at `t0` for rigid bodies, required otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hat0: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    /// Rotational only; defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<Vec<f64>>,
    /// Rotational only; defaults to `eta0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_hat0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write `timeseries.csv`.
    pub timeseries: bool,
    /// Append `alpha_hat` columns to the CSV.
    pub alpha_columns: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            timeseries: true,
            alpha_columns: false,
        }
    }
}

/// Parse an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `key.path=value` to a TOML tree, creating intermediate tables.
pub fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}

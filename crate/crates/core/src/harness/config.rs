//! Scenario configuration: one TOML document describing the plant, the
//! sensing model, the controller and the experiment protocol.
//!
//! Loading merges the user document over the defaults for its `kind`, then
//! deserializes with unknown keys rejected and validates every field.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Value;

use super::HarnessError;
use crate::control::{ControllerConfig, PidGains};
use crate::kinematics::{build_wrench_transform, GeometryConfig};
use crate::plant::{DampingLaw, NoiseModel, PlantConfig, Transmission};
use crate::sensing::SensingMode;

pub const SCHEMA_VERSION: u32 = 1;

/// z demands of the SEE steady-state table, N.
pub const TABLE_Z_DEMANDS: [f64; 5] = [0.0, 3.75, 7.5, 11.25, 15.0];
/// z demands shown in the SEE step-response figure, N.
pub const FIGURE_Z_DEMANDS: [f64; 4] = [0.0, 5.0, 10.0, 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TransmissionSweep,
    StaticSensing,
    Repeatability,
    QuasistaticValidation,
    DampingId,
    SfaSteps,
    SeeSteps,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::TransmissionSweep,
        ScenarioKind::StaticSensing,
        ScenarioKind::Repeatability,
        ScenarioKind::QuasistaticValidation,
        ScenarioKind::DampingId,
        ScenarioKind::SfaSteps,
        ScenarioKind::SeeSteps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::TransmissionSweep => "transmission_sweep",
            ScenarioKind::StaticSensing => "static_sensing",
            ScenarioKind::Repeatability => "repeatability",
            ScenarioKind::QuasistaticValidation => "quasistatic_validation",
            ScenarioKind::DampingId => "damping_id",
            ScenarioKind::SfaSteps => "sfa_steps",
            ScenarioKind::SeeSteps => "see_steps",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingSource {
    /// Use the plant's own parameters.
    Matched,
    /// Identify the model from a sweep of the plant before the experiment.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingChoice {
    Linear,
    Piecewise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub mode: SensingMode,
    pub source: SensingSource,
    /// Which identified damping law a calibrated model uses.
    pub damping: DampingChoice,
    /// Lower volume bound of the linearised transmission, ml.
    pub v_lin_ml: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            mode: SensingMode::Dynamic,
            source: SensingSource::Matched,
            damping: DampingChoice::Linear,
            v_lin_ml: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionSweepProtocol {
    pub volumes_ml: Vec<f64>,
    pub bends_deg: Vec<f64>,
    /// Tip displacement into the actuator, mm.
    pub displacement_mm: f64,
    pub ramp_s: f64,
    /// Readings averaged per pressure value.
    pub readings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSensingProtocol {
    /// Fractions of `v_max`.
    pub inflations: Vec<f64>,
    pub loads_n: Vec<f64>,
    pub baseline_readings: usize,
    pub readings_per_load: usize,
    pub settle_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatabilityProtocol {
    pub inflations: Vec<f64>,
    pub settle_s: f64,
    pub max_flow_ml_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasistaticValidationProtocol {
    pub inflations: Vec<f64>,
    pub loads_n: Vec<f64>,
    pub poses: usize,
    pub readings_per_pose: usize,
    pub settle_s: f64,
    pub max_flow_ml_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingIdProtocol {
    /// Flow magnitudes; each is run inflating then deflating.
    pub flows_ml_s: Vec<f64>,
    pub threshold_ml_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepsProtocol {
    pub inflations: Vec<f64>,
    /// Demands along the actuator axis (SFA) or Cartesian x.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demands_n: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demands_x_n: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demands_y_n: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demands_z_n: Vec<f64>,
    pub segment_s: f64,
    /// Trailing fraction of each segment used for the steady-state error.
    pub steady_fraction: f64,
    /// Band for the settling time, N.
    pub settle_band_n: f64,
    pub bilateral_clamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Protocol {
    TransmissionSweep(TransmissionSweepProtocol),
    StaticSensing(StaticSensingProtocol),
    Repeatability(RepeatabilityProtocol),
    QuasistaticValidation(QuasistaticValidationProtocol),
    DampingId(DampingIdProtocol),
    Steps(StepsProtocol),
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub repetitions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub plant: PlantConfig,
    pub geometry: GeometryConfig,
    pub sensing: SensingConfig,
    pub controller: ControllerConfig,
    pub protocol: Protocol,
}

fn percent_grid(from: u32, to: u32, step: u32) -> Vec<f64> {
    (from..=to).step_by(step as usize).map(|p| p as f64 / 100.0).collect()
}

fn profiled_sfa() -> PlantConfig {
    let mut plant = PlantConfig::sfa();
    plant.transmission = Transmission {
        volume_profile: Transmission::characterised_profile(),
        ..plant.transmission
    };
    plant.noise = NoiseModel::measured();
    plant
}

fn steps(inflations: Vec<f64>) -> StepsProtocol {
    StepsProtocol {
        inflations,
        demands_n: Vec::new(),
        demands_x_n: Vec::new(),
        demands_y_n: Vec::new(),
        demands_z_n: Vec::new(),
        segment_s: 8.0,
        steady_fraction: 0.2,
        settle_band_n: 0.1,
        bilateral_clamp: true,
    }
}

impl Scenario {
    /// Reference protocol and plant for each kind.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let mut s = Scenario {
            schema_version: SCHEMA_VERSION,
            kind,
            seed: 0,
            repetitions: 1,
            output: None,
            plant: PlantConfig::sfa(),
            geometry: GeometryConfig::single_axis(),
            sensing: SensingConfig::default(),
            controller: ControllerConfig::default(),
            protocol: Protocol::Steps(steps(percent_grid(50, 80, 10))),
        };
        match kind {
            ScenarioKind::TransmissionSweep => {
                s.plant = profiled_sfa();
                s.sensing.mode = SensingMode::QuasiStatic;
                s.protocol = Protocol::TransmissionSweep(TransmissionSweepProtocol {
                    volumes_ml: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
                    bends_deg: vec![0.0, 10.0, 20.0, 30.0, 40.0],
                    displacement_mm: 2.0,
                    ramp_s: 1.0,
                    readings: 50,
                });
            }
            ScenarioKind::StaticSensing => {
                s.plant = profiled_sfa();
                s.sensing.mode = SensingMode::Static;
                s.sensing.source = SensingSource::Calibrated;
                s.protocol = Protocol::StaticSensing(StaticSensingProtocol {
                    inflations: percent_grid(50, 100, 10),
                    loads_n: vec![2.0, 4.0, 6.0],
                    baseline_readings: 100,
                    readings_per_load: 100,
                    settle_s: 0.5,
                });
            }
            ScenarioKind::Repeatability => {
                s.plant.noise = NoiseModel::measured();
                s.repetitions = 500;
                s.sensing.mode = SensingMode::QuasiStatic;
                s.protocol = Protocol::Repeatability(RepeatabilityProtocol {
                    inflations: (0..8).map(|k| k as f64 / 7.0).collect(),
                    settle_s: 0.2,
                    max_flow_ml_s: 5.0,
                });
            }
            ScenarioKind::QuasistaticValidation => {
                s.plant = profiled_sfa();
                s.sensing.mode = SensingMode::QuasiStatic;
                s.sensing.source = SensingSource::Calibrated;
                s.protocol = Protocol::QuasistaticValidation(QuasistaticValidationProtocol {
                    inflations: percent_grid(50, 100, 10),
                    loads_n: vec![0.0, 2.0, 4.0, 6.0],
                    poses: 100,
                    readings_per_pose: 50,
                    settle_s: 0.5,
                    max_flow_ml_s: 5.0,
                });
            }
            ScenarioKind::DampingId => {
                s.plant.damping = DampingLaw::piecewise_default();
                s.sensing.damping = DampingChoice::Piecewise;
                s.protocol = Protocol::DampingId(DampingIdProtocol {
                    flows_ml_s: vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
                    threshold_ml_s: 0.1,
                });
            }
            ScenarioKind::SfaSteps => {
                let mut p = steps(percent_grid(50, 80, 10));
                p.demands_n = vec![0.0, 2.0, 4.0, 6.0];
                s.protocol = Protocol::Steps(p);
            }
            ScenarioKind::SeeSteps => {
                s.plant = PlantConfig::see();
                s.plant.axial_compliance = 0.5;
                s.geometry = GeometryConfig::default_see();
                s.controller.gains = PidGains::see_pi();
                let mut p = steps(percent_grid(50, 80, 10));
                p.demands_x_n = vec![-5.0, -2.5, 0.0, 2.5, 5.0];
                p.demands_y_n = vec![-5.0, -2.5, 0.0, 2.5, 5.0];
                p.demands_z_n = TABLE_Z_DEMANDS.to_vec();
                s.protocol = Protocol::Steps(p);
            }
        }
        s
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Runtime(format!("cannot serialise configuration: {e}")))
    }

    pub fn actuator_count(&self) -> usize {
        self.plant.actuator_count()
    }

    pub fn steps(&self) -> Option<&StepsProtocol> {
        match &self.protocol {
            Protocol::Steps(p) => Some(p),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |field: &str, reason: &str| {
            Err(HarnessError::Validation {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            return invalid("schema_version", "only schema_version = 1 is supported");
        }
        if self.repetitions < 1 {
            return invalid("repetitions", "must be at least 1");
        }
        self.plant.validate().map_err(|e| HarnessError::Validation {
            field: "plant".into(),
            reason: e.to_string(),
        })?;
        let n = self.actuator_count();
        if self.geometry.count != n {
            return invalid("geometry.count", "must equal the number of plant actuators");
        }
        let geometry = self.geometry.to_geometry().map_err(|e| HarnessError::Validation {
            field: "geometry".into(),
            reason: e.to_string(),
        })?;
        build_wrench_transform(&geometry).map_err(|e| HarnessError::Validation {
            field: "geometry".into(),
            reason: e.to_string(),
        })?;
        self.controller.validate(n).map_err(|e| HarnessError::Validation {
            field: "controller".into(),
            reason: e.to_string(),
        })?;
        if !(self.sensing.v_lin_ml >= 0.0 && self.sensing.v_lin_ml < self.plant.v_max) {
            return invalid("sensing.v_lin_ml", "must lie in [0, v_max)");
        }

        let fractions = |field: &str, v: &[f64]| {
            if v.is_empty() {
                return invalid(field, "must not be empty");
            }
            if v.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return invalid(field, "inflation fractions must lie in [0, 1]");
            }
            Ok(())
        };
        let finite_list = |field: &str, v: &[f64]| {
            if v.is_empty() {
                return invalid(field, "must not be empty");
            }
            if v.iter().any(|f| !f.is_finite()) {
                return invalid(field, "values must be finite");
            }
            Ok(())
        };
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                invalid(field, "must be positive")
            }
        };
        let expected_mode = match self.kind {
            ScenarioKind::StaticSensing => Some(SensingMode::Static),
            ScenarioKind::QuasistaticValidation => Some(SensingMode::QuasiStatic),
            _ => None,
        };
        if let Some(mode) = expected_mode {
            if self.sensing.mode != mode {
                return invalid("sensing.mode", "does not match the scenario kind");
            }
        }

        if self.kind != ScenarioKind::SeeSteps && n != 1 {
            return invalid("plant.stiffness", "this scenario kind runs on a single actuator");
        }

        match (&self.protocol, self.kind) {
            (Protocol::TransmissionSweep(p), ScenarioKind::TransmissionSweep) => {
                finite_list("protocol.volumes_ml", &p.volumes_ml)?;
                if p.volumes_ml.iter().any(|v| !(*v > 0.0 && *v <= self.plant.v_max)) {
                    return invalid("protocol.volumes_ml", "volumes must lie in (0, v_max]");
                }
                finite_list("protocol.bends_deg", &p.bends_deg)?;
                positive("protocol.displacement_mm", p.displacement_mm)?;
                positive("protocol.ramp_s", p.ramp_s)?;
                if p.readings < 1 {
                    return invalid("protocol.readings", "must be at least 1");
                }
                if self.plant.axial_compliance <= 0.0 {
                    return invalid("plant.axial_compliance", "a displaced tip needs a positive compliance");
                }
            }
            (Protocol::StaticSensing(p), ScenarioKind::StaticSensing) => {
                fractions("protocol.inflations", &p.inflations)?;
                finite_list("protocol.loads_n", &p.loads_n)?;
                if p.baseline_readings < crate::sensing::MIN_BASELINE_SAMPLES {
                    return invalid("protocol.baseline_readings", "must be at least 10");
                }
                if p.readings_per_load < 1 {
                    return invalid("protocol.readings_per_load", "must be at least 1");
                }
                if !(p.settle_s >= 0.0) {
                    return invalid("protocol.settle_s", "must be non-negative");
                }
            }
            (Protocol::Repeatability(p), ScenarioKind::Repeatability) => {
                fractions("protocol.inflations", &p.inflations)?;
                positive("protocol.max_flow_ml_s", p.max_flow_ml_s)?;
                if !(p.settle_s >= 0.0) {
                    return invalid("protocol.settle_s", "must be non-negative");
                }
                if self.repetitions < 2 {
                    return invalid("repetitions", "a spread needs at least 2 repetitions");
                }
            }
            (Protocol::QuasistaticValidation(p), ScenarioKind::QuasistaticValidation) => {
                fractions("protocol.inflations", &p.inflations)?;
                finite_list("protocol.loads_n", &p.loads_n)?;
                if p.poses < 1 || p.readings_per_pose < 1 {
                    return invalid("protocol.poses", "poses and readings_per_pose must be at least 1");
                }
                positive("protocol.max_flow_ml_s", p.max_flow_ml_s)?;
                if !(p.settle_s >= 0.0) {
                    return invalid("protocol.settle_s", "must be non-negative");
                }
            }
            (Protocol::DampingId(p), ScenarioKind::DampingId) => {
                finite_list("protocol.flows_ml_s", &p.flows_ml_s)?;
                if p.flows_ml_s.iter().any(|q| *q <= 0.0) {
                    return invalid("protocol.flows_ml_s", "flow magnitudes must be positive");
                }
                positive("protocol.threshold_ml_s", p.threshold_ml_s)?;
            }
            (Protocol::Steps(p), ScenarioKind::SfaSteps | ScenarioKind::SeeSteps) => {
                fractions("protocol.inflations", &p.inflations)?;
                positive("protocol.segment_s", p.segment_s)?;
                positive("protocol.settle_band_n", p.settle_band_n)?;
                if !(p.steady_fraction > 0.0 && p.steady_fraction < 1.0) {
                    return invalid("protocol.steady_fraction", "must lie in (0, 1)");
                }
                if self.plant.axial_compliance <= 0.0 {
                    return invalid("plant.axial_compliance", "a clamped tip needs a positive compliance");
                }
                if self.sensing.mode == SensingMode::Static {
                    return invalid("sensing.mode", "closed-loop control needs quasi_static or dynamic sensing");
                }
                if self.kind == ScenarioKind::SfaSteps {
                    finite_list("protocol.demands_n", &p.demands_n)?;
                    for (field, v) in [
                        ("protocol.demands_x_n", &p.demands_x_n),
                        ("protocol.demands_y_n", &p.demands_y_n),
                        ("protocol.demands_z_n", &p.demands_z_n),
                    ] {
                        if !v.is_empty() {
                            return invalid(field, "not used by sfa_steps; use demands_n");
                        }
                    }
                } else {
                    if !p.demands_n.is_empty() {
                        return invalid("protocol.demands_n", "not used by see_steps; use demands_x_n, demands_y_n, demands_z_n");
                    }
                    let lists = [&p.demands_x_n, &p.demands_y_n, &p.demands_z_n];
                    if lists.iter().all(|v| v.is_empty()) {
                        return invalid("protocol.demands_x_n", "at least one axis needs demands");
                    }
                    for (field, v) in [
                        ("protocol.demands_x_n", lists[0]),
                        ("protocol.demands_y_n", lists[1]),
                        ("protocol.demands_z_n", lists[2]),
                    ] {
                        if v.iter().any(|d| !d.is_finite()) {
                            return invalid(field, "values must be finite");
                        }
                    }
                }
            }
            _ => return invalid("protocol", "does not match the scenario kind"),
        }
        Ok(())
    }
}

/// Overlays `user` on `base`. Tables merge key by key, except that a table
/// whose `kind` differs from the default replaces it.
fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Table(b), Value::Table(u)) => {
            for (key, value) in u {
                match b.get_mut(&key) {
                    Some(existing @ Value::Table(_)) if value.is_table() && same_kind(existing, &value) => {
                        merge(existing, value)
                    }
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (base, user) => *base = user,
    }
}

fn same_kind(a: &Value, b: &Value) -> bool {
    match (a.get("kind"), b.get("kind")) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

fn section<T: DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<T, HarnessError> {
    let value = table.remove(key).unwrap_or(Value::Table(Default::default()));
    value.try_into().map_err(|e: toml::de::Error| HarnessError::Validation {
        field: key.to_string(),
        reason: e.message().trim().to_string(),
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Scenario, HarnessError> {
    let user: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
    let kind = match user.get("kind") {
        Some(Value::String(s)) => s.parse::<ScenarioKind>().map_err(|reason| HarnessError::Validation {
            field: "kind".into(),
            reason,
        })?,
        Some(_) => {
            return Err(HarnessError::Validation {
                field: "kind".into(),
                reason: "must be a string".into(),
            })
        }
        None => {
            return Err(HarnessError::Validation {
                field: "kind".into(),
                reason: "missing; one of transmission_sweep, static_sensing, repeatability, quasistatic_validation, damping_id, sfa_steps, see_steps".into(),
            })
        }
    };
    let defaults = Scenario::defaults(kind);
    let mut merged = Value::try_from(&defaults)
        .map_err(|e| HarnessError::Runtime(format!("cannot serialise defaults: {e}")))?;
    merge(&mut merged, Value::Table(user));
    let Value::Table(mut table) = merged else {
        unreachable!("merging tables yields a table")
    };

    let schema_version: u32 = section(&mut table, "schema_version")?;
    table.remove("kind");
    let seed: u64 = section(&mut table, "seed")?;
    let repetitions: usize = section(&mut table, "repetitions")?;
    let output: Option<PathBuf> = match table.remove("output") {
        Some(v) => Some(v.try_into().map_err(|e: toml::de::Error| HarnessError::Validation {
            field: "output".into(),
            reason: e.message().trim().to_string(),
        })?),
        None => None,
    };
    let plant: PlantConfig = section(&mut table, "plant")?;
    let geometry: GeometryConfig = section(&mut table, "geometry")?;
    let sensing: SensingConfig = section(&mut table, "sensing")?;
    let controller: ControllerConfig = section(&mut table, "controller")?;
    let protocol = match kind {
        ScenarioKind::TransmissionSweep => Protocol::TransmissionSweep(section(&mut table, "protocol")?),
        ScenarioKind::StaticSensing => Protocol::StaticSensing(section(&mut table, "protocol")?),
        ScenarioKind::Repeatability => Protocol::Repeatability(section(&mut table, "protocol")?),
        ScenarioKind::QuasistaticValidation => Protocol::QuasistaticValidation(section(&mut table, "protocol")?),
        ScenarioKind::DampingId => Protocol::DampingId(section(&mut table, "protocol")?),
        ScenarioKind::SfaSteps | ScenarioKind::SeeSteps => Protocol::Steps(section(&mut table, "protocol")?),
    };
    if let Some(key) = table.keys().next() {
        return Err(HarnessError::Validation {
            field: key.clone(),
            reason: format!("unknown key `{key}`"),
        });
    }
    let scenario = Scenario {
        schema_version,
        kind,
        seed,
        repetitions,
        output,
        plant,
        geometry,
        sensing,
        controller,
        protocol,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// A loaded scenario together with its fully expanded form.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    /// Effective configuration with all defaults filled in.
    pub echo: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let scenario = parse_config(&text)?;
    let echo = scenario.to_toml()?;
    log::info!("effective configuration for {}:\n{echo}", path.display());
    Ok(LoadedConfig { scenario, echo })
}
